#pragma once

#include <cmath>

namespace nav {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }

inline double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Compass-style bearing: 0 along +y, pi/2 along +x, wrapped to [0, 2*pi).
inline double bearing(Vec2 from, Vec2 to) {
  double th = std::atan2(to.x - from.x, to.y - from.y);
  if (th < 0.0) th += 2.0 * M_PI;
  return th;
}

}  // namespace nav
