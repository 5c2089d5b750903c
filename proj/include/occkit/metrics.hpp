#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "occkit/grid.hpp"
#include "occkit/raycast.hpp"

namespace occkit {

/// Per-ray ground-truth and prediction record; flows are taken at the
/// respective first-hit voxels and valid only when that side hit.
struct RayEval {
  RayHit gt;
  RayHit pred;
  Eigen::Vector2d gt_flow{Eigen::Vector2d::Zero()};
  Eigen::Vector2d pred_flow{Eigen::Vector2d::Zero()};
};

struct IoUResult {
  double mean{0.0};
  std::map<int, double> per_class;
};

// Average-velocity-error pooling: class_mean averages the per-class means,
// ray_pool averages over all counted elements jointly.
enum class MavePooling { kClassMean, kRayPool };

// Returned when no element qualifies; max(1 - mave, 0) then contributes 0.
inline constexpr double kMaveEmptySentinel = 1.0;

std::vector<RayEval> evaluate_rays(const OccupancyGrid& gt, const OccupancyGrid& pred,
                                   const FlowField& gt_flow, const FlowField& pred_flow,
                                   const RayBundle& bundle, int threads = 1);

/// Per-class ray IoU at one depth threshold. A ray is a TP for class c when
/// both sides hit class c and the depths agree within the threshold.
/// Classes with no TP/FP/FN rays are excluded from the mean.
IoUResult ray_iou(const std::vector<RayEval>& evals, double threshold,
                  const std::set<int>& classes);

double ray_iou_mean(const std::vector<RayEval>& evals,
                    const std::vector<double>& thresholds, const std::set<int>& classes);

double mave_tp(const std::vector<RayEval>& evals, double threshold,
               const std::set<int>& foreground,
               MavePooling pooling = MavePooling::kClassMean);

double mave_per_voxel(const OccupancyGrid& gt, const OccupancyGrid& pred,
                      const FlowField& gt_flow, const FlowField& pred_flow,
                      const std::set<int>& foreground,
                      MavePooling pooling = MavePooling::kClassMean);

/// Flow error over every ray whose gt hit is foreground and whose pred hit
/// exists, with no depth or class gating.
double mave_lq(const std::vector<RayEval>& evals, const std::set<int>& foreground,
               MavePooling pooling = MavePooling::kClassMean);

/// Occ Score = 0.9 * RayIoU + 0.1 * max(1 - mAVE, 0).
double occ_score(double ray_iou_mean, double mave);

struct MetricReport {
  std::map<double, double> ray_iou_at;
  double ray_iou_mean{0.0};
  double mave_tp{0.0};
  double mave_per_voxel{0.0};
  double mave_lq{0.0};
  double occ_score{0.0};
  std::map<int, double> per_class_iou;  // averaged over thresholds

  std::string to_json() const;
};

MetricReport evaluate_all(const OccupancyGrid& gt, const OccupancyGrid& pred,
                          const FlowField& gt_flow, const FlowField& pred_flow,
                          const RayBundle& bundle, const std::vector<double>& thresholds,
                          const std::set<int>& foreground, int threads = 1,
                          MavePooling pooling = MavePooling::kClassMean,
                          double mave_tp_threshold = 2.0);

}  // namespace occkit
