#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "occkit/grid.hpp"

namespace occkit {

/// Portable deterministic random stream: std::mt19937_64 raw draws mapped
/// to doubles by fixed arithmetic, so sequences are identical across
/// platforms and standard-library implementations.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(uniform() * (hi - lo + 1));
  }

 private:
  std::mt19937_64 engine_;
};

struct SynthConfig {
  std::uint64_t seed{0};
  GridSpec spec{Eigen::Vector3d(-40.0, -40.0, -1.0), 0.4, Eigen::Vector3i(200, 200, 16)};
  int n_boxes{5};
  std::vector<std::uint8_t> class_pool{2, 3, 4, 9};
  double v_min{-10.0};
  double v_max{10.0};
  bool ground_plane{true};
  std::uint8_t ground_class{11};
  int num_classes{17};
  std::uint8_t free_class{16};
  double dt{0.5};
};

struct SynthScene {
  OccupancyGrid gt_current;
  OccupancyGrid gt_future;
  FlowField flow;
  Trajectory trajectory;
};

/// Axis-aligned boxes with uniform per-box velocity; the future grid holds
/// each box displaced by round(v * dt / voxel_size) cells. Boxes that would
/// leave the grid in either frame are redrawn from the same seed stream, so
/// the scene is a pure function of the config.
SynthScene synth_scene(const SynthConfig& config);

}  // namespace occkit
