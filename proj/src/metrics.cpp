#include "occkit/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "occkit/parallel.hpp"

namespace occkit {
namespace {

bool is_tp(const RayEval& e, int cls, double threshold) {
  return e.gt.hit && e.pred.hit && e.gt.label == cls && e.pred.label == cls &&
         std::abs(e.pred.depth - e.gt.depth) <= threshold;
}

struct ErrorAccumulator {
  std::map<int, std::pair<double, std::size_t>> per_class;  // sum, count

  void add(int cls, double err) {
    auto& [sum, n] = per_class[cls];
    sum += err;
    ++n;
  }

  double finish(MavePooling pooling) const {
    if (per_class.empty()) return kMaveEmptySentinel;
    if (pooling == MavePooling::kRayPool) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& [cls, sc] : per_class) {
        sum += sc.first;
        n += sc.second;
      }
      return sum / static_cast<double>(n);
    }
    double mean_sum = 0.0;
    for (const auto& [cls, sc] : per_class) {
      mean_sum += sc.first / static_cast<double>(sc.second);
    }
    return mean_sum / static_cast<double>(per_class.size());
  }
};

}  // namespace

std::vector<RayEval> evaluate_rays(const OccupancyGrid& gt, const OccupancyGrid& pred,
                                   const FlowField& gt_flow, const FlowField& pred_flow,
                                   const RayBundle& bundle, int threads) {
  if (!(gt.spec == pred.spec) || !(gt.spec == gt_flow.spec) ||
      !(gt.spec == pred_flow.spec)) {
    throw std::invalid_argument("all grids must share one spec");
  }
  const std::size_t n = bundle.ray_count();
  std::vector<RayEval> evals(n);
  parallel_chunks(n, threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      RayEval& e = evals[r];
      const Eigen::Vector3d& o = bundle.origin_of(r);
      const Eigen::Vector3d& d = bundle.direction_of(r);
      e.gt = cast_first_hit(gt, o, d, bundle.pattern.max_range);
      e.pred = cast_first_hit(pred, o, d, bundle.pattern.max_range);
      if (e.gt.hit) e.gt_flow = gt_flow.at(e.gt.voxel);
      if (e.pred.hit) e.pred_flow = pred_flow.at(e.pred.voxel);
    }
  });
  return evals;
}

IoUResult ray_iou(const std::vector<RayEval>& evals, double threshold,
                  const std::set<int>& classes) {
  if (evals.empty()) throw std::invalid_argument("ray IoU undefined on empty eval list");
  if (threshold <= 0) throw std::invalid_argument("threshold must be positive");

  IoUResult out;
  double sum = 0.0;
  std::size_t counted = 0;
  for (int cls : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const RayEval& e : evals) {
      const bool tp_ray = is_tp(e, cls, threshold);
      if (tp_ray) {
        ++tp;
        continue;
      }
      if (e.gt.hit && e.gt.label == cls) ++fn;
      if (e.pred.hit && e.pred.label == cls) ++fp;
    }
    const std::size_t denom = tp + fp + fn;
    if (denom == 0) continue;  // absent class, excluded from the mean
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    out.per_class[cls] = iou;
    sum += iou;
    ++counted;
  }
  out.mean = counted > 0 ? sum / static_cast<double>(counted) : 0.0;
  return out;
}

double ray_iou_mean(const std::vector<RayEval>& evals,
                    const std::vector<double>& thresholds, const std::set<int>& classes) {
  if (thresholds.empty()) throw std::invalid_argument("thresholds must be non-empty");
  double sum = 0.0;
  for (double t : thresholds) sum += ray_iou(evals, t, classes).mean;
  return sum / static_cast<double>(thresholds.size());
}

double mave_tp(const std::vector<RayEval>& evals, double threshold,
               const std::set<int>& foreground, MavePooling pooling) {
  if (foreground.empty()) throw std::invalid_argument("foreground set must be non-empty");
  ErrorAccumulator acc;
  for (const RayEval& e : evals) {
    if (!e.gt.hit) continue;
    const int cls = e.gt.label;
    if (!foreground.count(cls)) continue;
    if (!is_tp(e, cls, threshold)) continue;
    acc.add(cls, (e.pred_flow - e.gt_flow).norm());
  }
  return acc.finish(pooling);
}

double mave_per_voxel(const OccupancyGrid& gt, const OccupancyGrid& pred,
                      const FlowField& gt_flow, const FlowField& pred_flow,
                      const std::set<int>& foreground, MavePooling pooling) {
  if (!(gt.spec == pred.spec) || !(gt.spec == gt_flow.spec) ||
      !(gt.spec == pred_flow.spec)) {
    throw std::invalid_argument("all grids must share one spec");
  }
  ErrorAccumulator acc;
  for (std::size_t v = 0; v < gt.labels.size(); ++v) {
    const int cls = gt.labels[v];
    if (gt.labels[v] != pred.labels[v] || !foreground.count(cls)) continue;
    acc.add(cls, (pred_flow.at(v) - gt_flow.at(v)).norm());
  }
  return acc.finish(pooling);
}

double mave_lq(const std::vector<RayEval>& evals, const std::set<int>& foreground,
               MavePooling pooling) {
  if (foreground.empty()) throw std::invalid_argument("foreground set must be non-empty");
  ErrorAccumulator acc;
  for (const RayEval& e : evals) {
    if (!e.gt.hit || !e.pred.hit) continue;
    const int cls = e.gt.label;
    if (!foreground.count(cls)) continue;
    acc.add(cls, (e.pred_flow - e.gt_flow).norm());
  }
  return acc.finish(pooling);
}

double occ_score(double ray_iou_mean, double mave) {
  return 0.9 * ray_iou_mean + 0.1 * std::max(1.0 - mave, 0.0);
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  nlohmann::json at = nlohmann::json::object();
  for (const auto& [t, v] : ray_iou_at) at[std::to_string(t)] = v;
  j["ray_iou_at"] = at;
  j["ray_iou_mean"] = ray_iou_mean;
  j["mave_tp"] = mave_tp;
  j["mave_per_voxel"] = mave_per_voxel;
  j["mave_lq"] = mave_lq;
  j["occ_score"] = occ_score;
  nlohmann::json pc = nlohmann::json::object();
  for (const auto& [cls, v] : per_class_iou) pc[std::to_string(cls)] = v;
  j["per_class_iou"] = pc;
  return j.dump(2);
}

MetricReport evaluate_all(const OccupancyGrid& gt, const OccupancyGrid& pred,
                          const FlowField& gt_flow, const FlowField& pred_flow,
                          const RayBundle& bundle, const std::vector<double>& thresholds,
                          const std::set<int>& foreground, int threads,
                          MavePooling pooling, double mave_tp_threshold) {
  std::set<int> classes;
  for (int c = 0; c < gt.num_classes; ++c) {
    if (c != gt.free_class) classes.insert(c);
  }

  const auto evals = evaluate_rays(gt, pred, gt_flow, pred_flow, bundle, threads);

  MetricReport report;
  std::map<int, std::pair<double, int>> class_sums;
  for (double t : thresholds) {
    const IoUResult r = ray_iou(evals, t, classes);
    report.ray_iou_at[t] = r.mean;
    for (const auto& [cls, v] : r.per_class) {
      class_sums[cls].first += v;
      class_sums[cls].second += 1;
    }
  }
  report.ray_iou_mean = ray_iou_mean(evals, thresholds, classes);
  for (const auto& [cls, sv] : class_sums) {
    report.per_class_iou[cls] = sv.first / sv.second;
  }
  report.mave_tp = mave_tp(evals, mave_tp_threshold, foreground, pooling);
  report.mave_per_voxel = mave_per_voxel(gt, pred, gt_flow, pred_flow, foreground, pooling);
  report.mave_lq = mave_lq(evals, foreground, pooling);
  report.occ_score = occ_score(report.ray_iou_mean, report.mave_tp);
  return report;
}

}  // namespace occkit
