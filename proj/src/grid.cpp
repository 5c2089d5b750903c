#include "occkit/grid.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace occkit {

Eigen::Vector3d voxel_to_world(const GridSpec& spec, const Eigen::Vector3i& index) {
  if (!spec.contains(index)) {
    throw std::out_of_range("voxel index outside grid dims");
  }
  return spec.origin +
         (index.cast<double>() + Eigen::Vector3d::Constant(0.5)) * spec.voxel_size;
}

std::optional<Eigen::Vector3i> world_to_voxel(const GridSpec& spec,
                                              const Eigen::Vector3d& point) {
  const Eigen::Vector3d rel = (point - spec.origin) / spec.voxel_size;
  const Eigen::Vector3i v(static_cast<int>(std::floor(rel.x())),
                          static_cast<int>(std::floor(rel.y())),
                          static_cast<int>(std::floor(rel.z())));
  if (!spec.contains(v)) return std::nullopt;
  return v;
}

std::size_t VoxelMask::count() const {
  return std::accumulate(bits.begin(), bits.end(), std::size_t{0},
                         [](std::size_t a, std::uint8_t b) { return a + (b != 0); });
}

}  // namespace occkit
