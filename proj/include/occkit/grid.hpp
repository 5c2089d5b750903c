#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace occkit {

/// Geometry of a dense voxel grid: metric box anchored at `origin` (min
/// corner), cubic voxels of edge `voxel_size`, `dims` voxels per axis.
/// The box is half-open: points on the max face are outside.
struct GridSpec {
  Eigen::Vector3d origin{-40.0, -40.0, -1.0};
  double voxel_size{0.4};
  Eigen::Vector3i dims{200, 200, 16};

  std::size_t num_voxels() const {
    return static_cast<std::size_t>(dims.x()) * dims.y() * dims.z();
  }

  // Linear layout is x-major C order: ((x*ny)+y)*nz + z.
  std::size_t linear_index(int x, int y, int z) const {
    return (static_cast<std::size_t>(x) * dims.y() + y) * dims.z() + z;
  }
  std::size_t linear_index(const Eigen::Vector3i& v) const {
    return linear_index(v.x(), v.y(), v.z());
  }

  Eigen::Vector3i unravel(std::size_t linear) const {
    const int z = static_cast<int>(linear % dims.z());
    linear /= dims.z();
    const int y = static_cast<int>(linear % dims.y());
    const int x = static_cast<int>(linear / dims.y());
    return {x, y, z};
  }

  bool contains(const Eigen::Vector3i& v) const {
    return (v.array() >= 0).all() && (v.array() < dims.array()).all();
  }

  Eigen::Vector3d max_corner() const {
    return origin + dims.cast<double>() * voxel_size;
  }

  bool operator==(const GridSpec& o) const {
    return origin == o.origin && voxel_size == o.voxel_size && dims == o.dims;
  }
};

/// Center of the voxel at `index`. Throws std::out_of_range outside dims.
Eigen::Vector3d voxel_to_world(const GridSpec& spec, const Eigen::Vector3i& index);

/// Voxel containing `point`, or nullopt when the point is outside the
/// half-open box.
std::optional<Eigen::Vector3i> world_to_voxel(const GridSpec& spec,
                                              const Eigen::Vector3d& point);

/// Dense semantic label grid. One class id is "free" (nothing there).
struct OccupancyGrid {
  GridSpec spec;
  int num_classes{17};
  std::uint8_t free_class{16};
  std::vector<std::uint8_t> labels;

  static OccupancyGrid all_free(const GridSpec& spec, int num_classes = 17,
                                std::uint8_t free_class = 16) {
    OccupancyGrid g{spec, num_classes, free_class, {}};
    g.labels.assign(spec.num_voxels(), free_class);
    return g;
  }

  std::uint8_t label_at(const Eigen::Vector3i& v) const {
    return labels[spec.linear_index(v)];
  }
  bool occupied(const Eigen::Vector3i& v) const {
    return label_at(v) != free_class;
  }
};

/// Per-voxel (x, y) velocity in m/s. Values on free voxels are carried but
/// ignored by every consumer.
struct FlowField {
  GridSpec spec;
  std::vector<double> flow;  // 2 doubles per voxel, voxel-major

  static FlowField zeros(const GridSpec& spec) {
    return {spec, std::vector<double>(spec.num_voxels() * 2, 0.0)};
  }

  Eigen::Vector2d at(std::size_t linear) const {
    return {flow[2 * linear], flow[2 * linear + 1]};
  }
  Eigen::Vector2d at(const Eigen::Vector3i& v) const {
    return at(spec.linear_index(v));
  }
  void set(std::size_t linear, const Eigen::Vector2d& f) {
    flow[2 * linear] = f.x();
    flow[2 * linear + 1] = f.y();
  }
};

/// Generic C-channel real-valued grid (uncertainties, soft occupancy,
/// warped features).
struct FeatureGrid {
  GridSpec spec;
  int channels{1};
  std::vector<double> values;  // voxel-major, then channel

  static FeatureGrid zeros(const GridSpec& spec, int channels) {
    return {spec, channels,
            std::vector<double>(spec.num_voxels() * channels, 0.0)};
  }

  double* at(std::size_t linear) { return values.data() + linear * channels; }
  const double* at(std::size_t linear) const {
    return values.data() + linear * channels;
  }
};

/// Dense boolean grid, one byte per voxel.
struct VoxelMask {
  GridSpec spec;
  std::vector<std::uint8_t> bits;

  static VoxelMask empty(const GridSpec& spec) {
    return {spec, std::vector<std::uint8_t>(spec.num_voxels(), 0)};
  }

  bool test(std::size_t linear) const { return bits[linear] != 0; }
  void set(std::size_t linear) { bits[linear] = 1; }
  std::size_t count() const;
};

/// One ego pose: sensor position in the grid's world frame plus a vertical
/// offset of the (virtual) sensor above that position.
struct Pose {
  Eigen::Vector3d position{Eigen::Vector3d::Zero()};
  double height_offset{0.0};
};

using Trajectory = std::vector<Pose>;

}  // namespace occkit
