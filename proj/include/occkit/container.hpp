#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <variant>

#include "occkit/grid.hpp"

namespace occkit {

// On-disk container: magic "OCCV", u32-le header length, UTF-8 JSON header
// (kind/version/dims/origin/voxel_size/dtype plus kind-specific keys), then
// the raw little-endian payload in the grid's C order.
//
// dtype per kind: occ -> u8, mask -> u8, flow -> f32, feat -> f64.

enum class ContainerError {
  kBadMagic,
  kVersionMismatch,
  kBadHeader,
  kDtypeMismatch,
  kDimsMismatch,
  kTruncated,
  kNonFinite,
  kIo,
};

class ContainerException : public std::runtime_error {
 public:
  ContainerException(ContainerError code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ContainerError code() const { return code_; }

 private:
  ContainerError code_;
};

using Container = std::variant<OccupancyGrid, FlowField, VoxelMask, FeatureGrid>;

Container load_container(const std::filesystem::path& path);

void save_container(const std::filesystem::path& path, const OccupancyGrid& g);
void save_container(const std::filesystem::path& path, const FlowField& f);
void save_container(const std::filesystem::path& path, const VoxelMask& m);
void save_container(const std::filesystem::path& path, const FeatureGrid& f);

// Typed loads; throw kBadHeader when the file holds a different kind.
OccupancyGrid load_occupancy(const std::filesystem::path& path);
FlowField load_flow(const std::filesystem::path& path);
VoxelMask load_mask(const std::filesystem::path& path);
FeatureGrid load_features(const std::filesystem::path& path);

}  // namespace occkit
