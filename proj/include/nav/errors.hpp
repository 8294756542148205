#pragma once

#include <stdexcept>
#include <string>

namespace nav {

// Dimension / rank / token-layout mismatches.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Semantic violations on otherwise well-shaped data: degenerate attention
// rows, masked ground-truth targets, out-of-vocabulary ids, asymmetric
// adjacency, malformed traces, misaligned trace/house pairs.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Environment generation / episode sampling gave up after bounded retries.
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values in tensors, losses or gradients.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration; message names the field.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File format, version or filesystem failures.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace nav
