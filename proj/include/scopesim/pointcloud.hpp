#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "scopesim/geometry.hpp"

namespace scopesim {

struct Aabb {
  Vec3 min_corner{0, 0, 0};
  Vec3 max_corner{0, 0, 0};

  void expand(const Vec3& p) {
    min_corner.x = std::min(min_corner.x, p.x);
    min_corner.y = std::min(min_corner.y, p.y);
    min_corner.z = std::min(min_corner.z, p.z);
    max_corner.x = std::max(max_corner.x, p.x);
    max_corner.y = std::max(max_corner.y, p.y);
    max_corner.z = std::max(max_corner.z, p.z);
  }

  bool contains(const Vec3& p, double tol = 0.0) const {
    return p.x >= min_corner.x - tol && p.x <= max_corner.x + tol &&
           p.y >= min_corner.y - tol && p.y <= max_corner.y + tol &&
           p.z >= min_corner.z - tol && p.z <= max_corner.z + tol;
  }
};

/// Static colored point cloud in world millimeters. Positions and colors are
/// stored as packed float triplets; immutable after load and safe to share
/// read-only across render workers.
struct PointCloudScene {
  std::vector<float> positions;  // x,y,z per point
  std::vector<float> colors;     // r,g,b per point, each in [0,1]
  Aabb bounds;

  std::size_t size() const { return positions.size() / 3; }

  Vec3 position(std::size_t i) const {
    return {positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]};
  }

  void add_point(const Vec3& p, float r, float g, float b) {
    if (positions.empty()) {
      bounds.min_corner = bounds.max_corner = p;
    } else {
      bounds.expand(p);
    }
    positions.push_back(static_cast<float>(p.x));
    positions.push_back(static_cast<float>(p.y));
    positions.push_back(static_cast<float>(p.z));
    colors.push_back(r);
    colors.push_back(g);
    colors.push_back(b);
  }

  void recompute_bounds();
};

/// Scene file: text header ("SCOPESCENE 1", point count, bounds) followed by
/// little-endian float32 records x,y,z,r,g,b per point.
void save_scene(const PointCloudScene& scene, const std::string& path);
PointCloudScene load_scene(const std::string& path);

}  // namespace scopesim
