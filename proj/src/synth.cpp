#include "occkit/synth.hpp"

#include <cmath>
#include <stdexcept>

namespace occkit {
namespace {

struct Box {
  Eigen::Vector3i lo;   // min voxel
  Eigen::Vector3i size;
  Eigen::Vector3i shift;  // voxel displacement in the future frame
  Eigen::Vector2d velocity;
  std::uint8_t cls;
};

void paint(OccupancyGrid& grid, FlowField* flow, const Box& box,
           const Eigen::Vector3i& offset) {
  for (int x = 0; x < box.size.x(); ++x) {
    for (int y = 0; y < box.size.y(); ++y) {
      for (int z = 0; z < box.size.z(); ++z) {
        const Eigen::Vector3i v = box.lo + offset + Eigen::Vector3i(x, y, z);
        const std::size_t i = grid.spec.linear_index(v);
        grid.labels[i] = box.cls;
        if (flow) flow->set(i, box.velocity);
      }
    }
  }
}

}  // namespace

SynthScene synth_scene(const SynthConfig& config) {
  if (config.n_boxes < 0 || config.v_min > config.v_max ||
      (config.n_boxes > 0 && config.class_pool.empty())) {
    throw std::invalid_argument("invalid synth config");
  }
  const GridSpec& spec = config.spec;
  RandomStream rng(config.seed);

  SynthScene scene{OccupancyGrid::all_free(spec, config.num_classes, config.free_class),
                   OccupancyGrid::all_free(spec, config.num_classes, config.free_class),
                   FlowField::zeros(spec), {}};

  if (config.ground_plane) {
    for (int x = 0; x < spec.dims.x(); ++x) {
      for (int y = 0; y < spec.dims.y(); ++y) {
        const std::size_t i = spec.linear_index(x, y, 0);
        scene.gt_current.labels[i] = config.ground_class;
        scene.gt_future.labels[i] = config.ground_class;
      }
    }
  }

  for (int b = 0; b < config.n_boxes; ++b) {
    Box box;
    for (int attempt = 0;; ++attempt) {
      for (int a = 0; a < 3; ++a) {
        const int max_size = std::min(8, spec.dims[a]);
        box.size[a] = rng.uniform_int(1, max_size);
        box.lo[a] = rng.uniform_int(0, spec.dims[a] - box.size[a]);
      }
      box.velocity = {rng.uniform(config.v_min, config.v_max),
                      rng.uniform(config.v_min, config.v_max)};
      box.shift = {
          static_cast<int>(std::llround(box.velocity.x() * config.dt / spec.voxel_size)),
          static_cast<int>(std::llround(box.velocity.y() * config.dt / spec.voxel_size)),
          0};
      const Eigen::Vector3i future_lo = box.lo + box.shift;
      const bool ok = spec.contains(future_lo) &&
                      spec.contains(future_lo + box.size - Eigen::Vector3i::Ones());
      if (ok) break;
      if (attempt > 1000) throw std::runtime_error("cannot place box inside grid");
    }
    box.cls = config.class_pool[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(config.class_pool.size()) - 1))];
    paint(scene.gt_current, &scene.flow, box, Eigen::Vector3i::Zero());
    paint(scene.gt_future, nullptr, box, box.shift);
  }

  // Straight 3-pose line through the box, sensor 1/4 of the way up.
  const Eigen::Vector3d extent = spec.dims.cast<double>() * spec.voxel_size;
  const double y_mid = spec.origin.y() + 0.5 * extent.y();
  const double z_pos = spec.origin.z() + 0.25 * extent.z();
  for (double fx : {0.3, 0.5, 0.7}) {
    scene.trajectory.push_back(
        Pose{{spec.origin.x() + fx * extent.x(), y_mid, z_pos}, 0.0});
  }
  return scene;
}

}  // namespace occkit
