#include "occkit/raycast.hpp"

#include <numbers>
#include <stdexcept>

#include "occkit/parallel.hpp"

namespace occkit {
namespace {

constexpr double kUnitTol = 1e-9;

void require_unit(const Eigen::Vector3d& d) {
  if (std::abs(d.norm() - 1.0) > kUnitTol) {
    throw std::invalid_argument("ray direction must have unit norm");
  }
}

// First-hit voxels of all rays in [begin, end), deduplicated later.
void collect_hits(const OccupancyGrid& grid, const RayBundle& bundle,
                  std::size_t begin, std::size_t end,
                  std::vector<std::size_t>& hits) {
  for (std::size_t r = begin; r < end; ++r) {
    const RayHit h = cast_first_hit(grid, bundle.origin_of(r), bundle.direction_of(r),
                                    bundle.pattern.max_range);
    if (h.hit) hits.push_back(grid.spec.linear_index(h.voxel));
  }
}

}  // namespace

RayPattern RayPattern::default_lidar() {
  RayPattern p;
  p.azimuth_count = 1800;
  p.max_range = 60.0;
  const double lo = -30.0 * std::numbers::pi / 180.0;
  const double hi = 10.0 * std::numbers::pi / 180.0;
  const int n = 32;
  p.elevations.reserve(n);
  for (int i = 0; i < n; ++i) {
    p.elevations.push_back(lo + (hi - lo) * i / (n - 1));
  }
  return p;
}

RayBundle generate_bundle(const Trajectory& trajectory, const RayPattern& pattern) {
  if (trajectory.empty()) throw std::invalid_argument("trajectory must be non-empty");
  if (pattern.azimuth_count < 1 || pattern.max_range <= 0 || pattern.elevations.empty()) {
    throw std::invalid_argument("invalid ray pattern");
  }
  RayBundle b;
  b.pattern = pattern;
  b.origins.reserve(trajectory.size());
  for (const Pose& p : trajectory) {
    b.origins.push_back(p.position + Eigen::Vector3d(0, 0, p.height_offset));
  }
  b.directions.reserve(pattern.elevations.size() * pattern.azimuth_count);
  for (double el : pattern.elevations) {
    const double ce = std::cos(el), se = std::sin(el);
    for (int j = 0; j < pattern.azimuth_count; ++j) {
      const double az = 2.0 * std::numbers::pi * j / pattern.azimuth_count;
      b.directions.emplace_back(ce * std::cos(az), ce * std::sin(az), se);
    }
  }
  return b;
}

std::vector<Eigen::Vector3i> traverse(const GridSpec& spec,
                                      const Eigen::Vector3d& origin,
                                      const Eigen::Vector3d& direction,
                                      double max_range) {
  require_unit(direction);
  std::vector<Eigen::Vector3i> out;
  walk_ray(spec, origin, direction, max_range,
           [&out](const Eigen::Vector3i& v, double) {
             out.push_back(v);
             return true;
           });
  return out;
}

RayHit cast_first_hit(const OccupancyGrid& grid, const Eigen::Vector3d& origin,
                      const Eigen::Vector3d& direction, double max_range) {
  require_unit(direction);
  RayHit hit;
  walk_ray(grid.spec, origin, direction, max_range,
           [&](const Eigen::Vector3i& v, double t_entry) {
             const std::uint8_t label = grid.label_at(v);
             if (label == grid.free_class) return true;
             hit.hit = true;
             hit.depth = std::max(t_entry, 0.0);
             hit.voxel = v;
             hit.label = label;
             return false;
           });
  return hit;
}

VoxelMask visible_mask_v1(const OccupancyGrid& grid, const RayBundle& bundle,
                          int threads) {
  const std::size_t n_rays = bundle.ray_count();
  const std::size_t workers = plan_workers(n_rays, threads);
  std::vector<std::vector<std::uint8_t>> partial(
      workers, std::vector<std::uint8_t>(grid.spec.num_voxels(), 0));

  parallel_chunks(n_rays, threads, [&](std::size_t w, std::size_t begin, std::size_t end) {
    auto& bits = partial[w];
    for (std::size_t r = begin; r < end; ++r) {
      walk_ray(grid.spec, bundle.origin_of(r), bundle.direction_of(r),
               bundle.pattern.max_range,
               [&](const Eigen::Vector3i& v, double) {
                 bits[grid.spec.linear_index(v)] = 1;
                 return !grid.occupied(v);  // mark first hit, then stop
               });
    }
  });

  VoxelMask mask = VoxelMask::empty(grid.spec);
  for (const auto& bits : partial) {
    for (std::size_t i = 0; i < bits.size(); ++i) mask.bits[i] |= bits[i];
  }
  return mask;
}

VoxelMask visible_mask_v2(const OccupancyGrid& grid, const RayBundle& bundle,
                          double dilate_radius, int threads) {
  if (dilate_radius < 0) throw std::invalid_argument("dilate_radius must be >= 0");
  VoxelMask mask = visible_mask_v1(grid, bundle, threads);

  const std::size_t n_rays = bundle.ray_count();
  const std::size_t workers = plan_workers(n_rays, threads);
  std::vector<std::vector<std::size_t>> partial_hits(workers);
  parallel_chunks(n_rays, threads, [&](std::size_t w, std::size_t begin, std::size_t end) {
    collect_hits(grid, bundle, begin, end, partial_hits[w]);
  });

  std::vector<std::uint8_t> is_hit(grid.spec.num_voxels(), 0);
  for (const auto& hits : partial_hits) {
    for (std::size_t i : hits) is_hit[i] = 1;
  }

  // Discrete ball of center-to-center offsets within the radius.
  const double h = grid.spec.voxel_size;
  const int reach = static_cast<int>(std::floor(dilate_radius / h));
  std::vector<Eigen::Vector3i> ball;
  for (int dx = -reach; dx <= reach; ++dx) {
    for (int dy = -reach; dy <= reach; ++dy) {
      for (int dz = -reach; dz <= reach; ++dz) {
        const double d2 = double(dx) * dx + double(dy) * dy + double(dz) * dz;
        if (std::sqrt(d2) * h <= dilate_radius) ball.emplace_back(dx, dy, dz);
      }
    }
  }

  for (std::size_t i = 0; i < is_hit.size(); ++i) {
    if (!is_hit[i]) continue;
    const Eigen::Vector3i c = grid.spec.unravel(i);
    for (const Eigen::Vector3i& off : ball) {
      const Eigen::Vector3i v = c + off;
      if (grid.spec.contains(v)) mask.set(grid.spec.linear_index(v));
    }
  }
  return mask;
}

VoxelMask select_hard_examples(const FeatureGrid& uncertainty, const VoxelMask& mask,
                               double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("fraction must be in (0, 1]");
  }
  if (uncertainty.channels != 1 || !(uncertainty.spec == mask.spec)) {
    throw std::invalid_argument("uncertainty grid must be 1-channel on the mask's spec");
  }
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (mask.test(i)) indices.push_back(i);
  }
  VoxelMask out = VoxelMask::empty(mask.spec);
  if (indices.empty()) return out;

  const auto take = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(indices.size())));
  std::partial_sort(indices.begin(), indices.begin() + take, indices.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double ua = uncertainty.values[a];
                      const double ub = uncertainty.values[b];
                      if (ua != ub) return ua > ub;
                      return a < b;
                    });
  for (std::size_t k = 0; k < take; ++k) out.set(indices[k]);
  return out;
}

}  // namespace occkit
