#pragma once

#include <array>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "occkit/grid.hpp"

namespace occkit {

/// A value scattered from a continuous position. Positions are in voxel
/// units (grid min corner at 0), center-aligned: a voxel center sits at
/// index + 0.5.
struct SplatSample {
  Eigen::Vector3d position{Eigen::Vector3d::Zero()};
  Eigen::VectorXd value;
};

struct SplatWeight {
  Eigen::Vector3i voxel{0, 0, 0};
  double weight{0.0};
};

/// Trilinear weights of the up-to-8 lattice cells around (position - 0.5).
/// Out-of-bounds neighbors are dropped; in-bounds weights sum to 1 when all
/// eight are inside.
struct SplatNeighborhood {
  std::array<SplatWeight, 8> entries;
  int count{0};
};

SplatNeighborhood splat_weights(const GridSpec& spec, const Eigen::Vector3d& position);

/// Scatter-add of value * weight into each sample's neighbors.
FeatureGrid splat(const std::vector<SplatSample>& samples, const GridSpec& spec,
                  int channels);

/// Moves every voxel's features by (flow_x, flow_y, 0) * dt and splats the
/// result. Mass exiting the box is dropped.
FeatureGrid warp_forward(const FeatureGrid& features, const FlowField& flow,
                         double dt, int threads = 1);

/// One-hot encodes occupied voxels (free voxels transport nothing) and
/// warps; channel c holds the soft mass of class c.
FeatureGrid warp_occupancy(const OccupancyGrid& current, const FlowField& flow,
                           double dt, int threads = 1);

/// Mean cross-entropy between the warped per-voxel class distribution
/// (epsilon-smoothed, renormalized) and the future one-hot labels, over
/// voxels occupied in gt_future. Optional mask restricts the average.
double warp_score(const FeatureGrid& warped, const OccupancyGrid& gt_future,
                  double eps = 1e-6, const VoxelMask* mask = nullptr);

struct WarpGradient {
  FeatureGrid d_features;
  FlowField d_flow;
};

/// Analytic gradients of warp_forward. Features backpropagate through the
/// transposed splat (a gather); flow through the piecewise-linear trilinear
/// weights. On a lattice plane the one-sided derivative from the positive
/// side is used (the fractional part is right-continuous there).
WarpGradient grad_warp(const FeatureGrid& features, const FlowField& flow, double dt,
                       const FeatureGrid& upstream);

}  // namespace occkit
