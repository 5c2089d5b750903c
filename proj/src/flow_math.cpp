#include "occkit/flow_math.hpp"

#include <cmath>
#include <stdexcept>

namespace occkit {
namespace {

void require_simplex(const Eigen::VectorXd& b, double tol) {
  if (b.size() == 0) throw std::invalid_argument("empty simplex vector");
  if (b.minCoeff() < 0.0 || std::abs(b.sum() - 1.0) > tol) {
    throw std::invalid_argument("vector is not on the probability simplex");
  }
}

}  // namespace

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  if (logits.size() == 0 || !logits.allFinite()) {
    throw std::invalid_argument("softmax needs a non-empty finite input");
  }
  const Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
  const Eigen::VectorXd e = shifted.array().exp();
  return e / e.sum();
}

Eigen::VectorXd bin_centers(const Eigen::VectorXd& b, const BinConfig& config) {
  require_simplex(b, 1e-6);
  if (config.f_min >= config.f_max) throw std::invalid_argument("f_min must be < f_max");
  const double span = config.f_max - config.f_min;
  Eigen::VectorXd c(b.size());
  double cumulative = 0.0;
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    c[i] = config.f_min + span * (0.5 * b[i] + cumulative);
    cumulative += b[i];
  }
  return c;
}

double aggregate_flow(const Eigen::VectorXd& centers, const Eigen::VectorXd& weights) {
  if (centers.size() != weights.size()) {
    throw std::invalid_argument("centers/weights length mismatch");
  }
  require_simplex(weights, 1e-6);
  return centers.dot(weights);
}

FlowLoss flow_loss(const std::vector<Eigen::Vector2d>& pred,
                   const std::vector<Eigen::Vector2d>& gt, double lambda, double eps) {
  if (pred.size() != gt.size()) throw std::invalid_argument("flow field size mismatch");
  if (pred.empty()) throw std::invalid_argument("no valid voxels for flow loss");

  double l2 = 0.0;
  double cos_sum = 0.0;
  std::size_t cos_count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    l2 += (pred[i] - gt[i]).squaredNorm();
    const double np = pred[i].norm();
    const double ng = gt[i].norm();
    if (np > eps && ng > eps) {
      cos_sum += pred[i].dot(gt[i]) / (np * ng);
      ++cos_count;
    }
  }
  FlowLoss loss;
  loss.l2 = l2 / static_cast<double>(pred.size());
  loss.cos = cos_count > 0 ? cos_sum / static_cast<double>(cos_count) : 0.0;
  loss.combined = loss.l2 + lambda * (1.0 - loss.cos);
  return loss;
}

Eigen::MatrixXd grad_bin_centers(const Eigen::VectorXd& b, const BinConfig& config) {
  const double span = config.f_max - config.f_min;
  const Eigen::Index n = b.size();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) jac(i, j) = span;
    jac(i, i) = 0.5 * span;
  }
  return jac;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> grad_aggregate(
    const Eigen::VectorXd& centers, const Eigen::VectorXd& weights) {
  if (centers.size() != weights.size()) {
    throw std::invalid_argument("centers/weights length mismatch");
  }
  return {weights, centers};
}

Eigen::VectorXd grad_through_softmax(const Eigen::VectorXd& logits,
                                     const Eigen::VectorXd& downstream) {
  if (logits.size() != downstream.size()) {
    throw std::invalid_argument("logits/gradient length mismatch");
  }
  const Eigen::VectorXd s = softmax(logits);
  const double inner = s.dot(downstream);
  return s.array() * (downstream.array() - inner);
}

}  // namespace occkit
