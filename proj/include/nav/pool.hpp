#pragma once

#include <string>

#include "nav/config.hpp"
#include "nav/env.hpp"

namespace nav {

struct EnvPool {
  EnvSplit train;
  EnvSplit val_seen;    // the training houses with fresh episodes
  EnvSplit val_unseen;  // houses from disjoint generation seeds
};

// Deterministic pool generation per the config counts. Every house is
// verified to admit at least one episode within the hop bounds.
EnvPool generate_pool(const RunConfig& cfg, std::uint64_t seed);

// Writes train.json / val_seen.json / val_unseen.json into out_dir.
void save_pool(const EnvPool& pool, const std::string& out_dir);
EnvPool load_pool(const std::string& dir);

}  // namespace nav
