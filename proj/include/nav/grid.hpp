#pragma once

#include <vector>

#include "nav/errors.hpp"
#include "nav/geom.hpp"

namespace nav {

// d x d lattice of candidate-target cell centers, spaced s meters apart and
// centered on the episode start (which is the origin of the relative frame).
struct TargetGridSpec {
  int d = 5;
  double s = 6.0;
  std::vector<Vec2> centers;  // index = i*d + j, x from i, y from j

  static TargetGridSpec make(int d, double s);
  int q() const { return d * d; }
};

// Nearest cell center by Euclidean distance; ties break to the lowest index.
int target_cell_index(const TargetGridSpec& grid, Vec2 rel_location);

}  // namespace nav
