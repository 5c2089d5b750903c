#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "occkit/grid.hpp"

namespace occkit {

/// Virtual-LiDAR beam layout: one ray per (elevation, azimuth) pair, with
/// azimuths uniformly spaced over [0, 2pi) starting at 0.
struct RayPattern {
  std::vector<double> elevations;
  int azimuth_count{1};
  double max_range{60.0};

  // 32 channels uniform in [-30deg, +10deg], 1800 azimuths, 60 m.
  static RayPattern default_lidar();
};

/// Rays cast from every trajectory pose; the direction fan is shared by
/// all origins.
struct RayBundle {
  std::vector<Eigen::Vector3d> origins;
  std::vector<Eigen::Vector3d> directions;
  RayPattern pattern;

  std::size_t ray_count() const { return origins.size() * directions.size(); }
  const Eigen::Vector3d& origin_of(std::size_t ray) const {
    return origins[ray / directions.size()];
  }
  const Eigen::Vector3d& direction_of(std::size_t ray) const {
    return directions[ray % directions.size()];
  }
};

struct RayHit {
  bool hit{false};
  double depth{std::numeric_limits<double>::infinity()};
  Eigen::Vector3i voxel{-1, -1, -1};
  std::uint8_t label{0};
};

RayBundle generate_bundle(const Trajectory& trajectory, const RayPattern& pattern);

/// Walks the segment [origin, origin + max_range*direction] through the
/// grid, invoking fn(voxel, t_entry) for every voxel whose interior the
/// segment crosses, in entry order. Stops early when fn returns false.
/// When the ray crosses a boundary edge/corner exactly, axes step in
/// x, then y, then z order.
template <typename Fn>
void walk_ray(const GridSpec& spec, const Eigen::Vector3d& origin,
              const Eigen::Vector3d& direction, double max_range, Fn&& fn) {
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Clip the segment to the box.
  double t0 = 0.0, t1 = max_range;
  const Eigen::Vector3d lo = spec.origin;
  const Eigen::Vector3d hi = spec.max_corner();
  for (int a = 0; a < 3; ++a) {
    const double d = direction[a];
    if (d == 0.0) {
      if (origin[a] <= lo[a] || origin[a] >= hi[a]) return;
    } else {
      double ta = (lo[a] - origin[a]) / d;
      double tb = (hi[a] - origin[a]) / d;
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
  }
  if (t0 >= t1) return;

  const double h = spec.voxel_size;
  const Eigen::Vector3d entry = origin + t0 * direction;
  Eigen::Vector3i v;
  for (int a = 0; a < 3; ++a) {
    v[a] = static_cast<int>(std::floor((entry[a] - lo[a]) / h));
    v[a] = std::clamp(v[a], 0, spec.dims[a] - 1);
  }

  Eigen::Vector3i step;
  Eigen::Vector3d t_max, t_delta;
  for (int a = 0; a < 3; ++a) {
    const double d = direction[a];
    if (d > 0.0) {
      step[a] = 1;
      t_max[a] = (lo[a] + (v[a] + 1) * h - origin[a]) / d;
      t_delta[a] = h / d;
    } else if (d < 0.0) {
      step[a] = -1;
      t_max[a] = (lo[a] + v[a] * h - origin[a]) / d;
      t_delta[a] = -h / d;
    } else {
      step[a] = 0;
      t_max[a] = kInf;
      t_delta[a] = kInf;
    }
  }

  double t_entry = t0;
  while (true) {
    if (!fn(v, t_entry)) return;
    const int axis = (t_max.x() <= t_max.y() && t_max.x() <= t_max.z()) ? 0
                     : (t_max.y() <= t_max.z())                         ? 1
                                                                        : 2;
    if (t_max[axis] >= t1) return;
    t_entry = t_max[axis];
    v[axis] += step[axis];
    if (v[axis] < 0 || v[axis] >= spec.dims[axis]) return;
    t_max[axis] += t_delta[axis];
  }
}

/// Voxels the segment crosses, in entry order. Throws on non-unit direction.
std::vector<Eigen::Vector3i> traverse(const GridSpec& spec,
                                      const Eigen::Vector3d& origin,
                                      const Eigen::Vector3d& direction,
                                      double max_range);

/// First occupied voxel along the ray. Depth is the distance to the voxel's
/// entry plane, clamped to 0 when the origin starts inside it.
RayHit cast_first_hit(const OccupancyGrid& grid, const Eigen::Vector3d& origin,
                      const Eigen::Vector3d& direction, double max_range);

/// Ray visible mask V1: every voxel any ray traverses up to and including
/// its first occupied voxel.
VoxelMask visible_mask_v1(const OccupancyGrid& grid, const RayBundle& bundle,
                          int threads = 1);

/// V2: V1 plus all voxels whose center lies within dilate_radius of the
/// center of any first-hit voxel.
VoxelMask visible_mask_v2(const OccupancyGrid& grid, const RayBundle& bundle,
                          double dilate_radius = 2.0, int threads = 1);

/// Top ceil(fraction * masked count) masked voxels by uncertainty; ties
/// resolved by ascending linear index.
VoxelMask select_hard_examples(const FeatureGrid& uncertainty, const VoxelMask& mask,
                               double fraction);

// {"origins": [[x,y,z],...], "pattern": {"elevations": [...],
//  "azimuth_count": N, "max_range": R}}; directions are regenerated from
// the pattern on load.
std::string bundle_to_json(const RayBundle& bundle);
RayBundle bundle_from_json(const std::string& text);

}  // namespace occkit
