#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

namespace occkit {

/// Flow range partitioned into n adaptive bins.
struct BinConfig {
  int n_bins{32};
  double f_min{-25.0};
  double f_max{25.0};
};

/// Max-subtracted softmax; throws on non-finite input.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// Bin centers from the bin-width simplex b:
///   c_i = f_min + (f_max - f_min) * (b_i / 2 + sum_{j<i} b_j).
/// b must sum to 1 within 1e-6 with non-negative components.
Eigen::VectorXd bin_centers(const Eigen::VectorXd& b, const BinConfig& config);

/// Weighted sum of bin centers; a convex combination, so the result stays
/// inside [min(c), max(c)].
double aggregate_flow(const Eigen::VectorXd& centers, const Eigen::VectorXd& weights);

struct FlowLoss {
  double l2{0.0};
  double cos{0.0};
  double combined{0.0};
};

/// Mean squared L2 error plus a (1 - cosine) direction term over aligned
/// per-voxel flow pairs. Cosine is averaged only over pairs where both
/// vectors exceed `eps` in norm.
FlowLoss flow_loss(const std::vector<Eigen::Vector2d>& pred,
                   const std::vector<Eigen::Vector2d>& gt, double lambda = 1.0,
                   double eps = 1e-6);

/// Jacobian dc/db: (f_max - f_min) * (1 below the diagonal, 1/2 on it).
Eigen::MatrixXd grad_bin_centers(const Eigen::VectorXd& b, const BinConfig& config);

/// Gradients of the weighted sum: df/dc = weights, df/dweights = centers.
std::pair<Eigen::VectorXd, Eigen::VectorXd> grad_aggregate(
    const Eigen::VectorXd& centers, const Eigen::VectorXd& weights);

/// Backpropagates a gradient w.r.t. softmax output to the logits:
///   g_logits = s .* (g - <s, g>).
Eigen::VectorXd grad_through_softmax(const Eigen::VectorXd& logits,
                                     const Eigen::VectorXd& downstream);

}  // namespace occkit
