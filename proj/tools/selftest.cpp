#include "selftest.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <vector>

#include "occkit/flow_math.hpp"
#include "occkit/metrics.hpp"
#include "occkit/raycast.hpp"
#include "occkit/splat_warp.hpp"
#include "occkit/synth.hpp"

namespace occkit::tools {
namespace {

bool report(const char* name, bool ok) {
  std::printf("%-44s %s\n", name, ok ? "ok" : "FAILED");
  return ok;
}

// Reference traversal by dense marching; independent of walk_ray.
std::vector<Eigen::Vector3i> march(const GridSpec& spec, const Eigen::Vector3d& o,
                                   const Eigen::Vector3d& d, double range) {
  const double h = spec.voxel_size;
  const Eigen::Vector3d lo = spec.origin;
  const Eigen::Vector3d hi = spec.max_corner();
  double t0 = 0.0, t1 = range;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] <= lo[a] || o[a] >= hi[a]) return {};
      continue;
    }
    double ta = (lo[a] - o[a]) / d[a], tb = (hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 >= t1) return {};
  std::vector<Eigen::Vector3i> out;
  const double step = 1e-3 * h;
  for (double t = t0 + 1e-9 * h; t < t1; t += step) {
    const Eigen::Vector3d p = o + t * d;
    Eigen::Vector3i v;
    bool in = true;
    for (int a = 0; a < 3; ++a) {
      v[a] = static_cast<int>(std::floor((p[a] - lo[a]) / h));
      in = in && v[a] >= 0 && v[a] < spec.dims[a];
    }
    if (in && (out.empty() || out.back() != v)) out.push_back(v);
  }
  return out;
}

bool check_traversal() {
  std::mt19937 rng(2024);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> pos(-3.0, 11.0);
  const GridSpec spec{Eigen::Vector3d(0, 0, 0), 1.0, Eigen::Vector3i(8, 8, 8)};
  for (int k = 0; k < 200; ++k) {
    Eigen::Vector3d d(g(rng), g(rng), g(rng));
    if (d.norm() < 1e-6) continue;
    d.normalize();
    const Eigen::Vector3d o(pos(rng), pos(rng), pos(rng));
    const auto got = traverse(spec, o, d, 25.0);
    const auto want = march(spec, o, d, 25.0);
    if (got != want) return false;
  }
  return true;
}

bool check_ray_iou() {
  std::set<int> classes;
  for (int c = 0; c < 16; ++c) classes.insert(c);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.spec = GridSpec{Eigen::Vector3d(0, 0, 0), 0.5, Eigen::Vector3i(20, 20, 6)};
    cfg.n_boxes = 3;
    cfg.v_min = -3;
    cfg.v_max = 3;
    SynthConfig cfg2 = cfg;
    cfg2.seed = seed + 1000;
    const SynthScene a = synth_scene(cfg), b = synth_scene(cfg2);
    const RayBundle bundle =
        generate_bundle(a.trajectory, RayPattern{{-0.2, 0.0, 0.2}, 64, 15.0});
    const auto evals =
        evaluate_rays(a.gt_current, b.gt_current, a.flow, b.flow, bundle);

    for (double t : {1.0, 2.0, 4.0}) {
      // Counting oracle; a too-far ray with matching labels is both FP and FN.
      double sum = 0.0;
      int counted = 0;
      for (int cls : classes) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (const auto& e : evals) {
          const bool in_gt = e.gt.hit && e.gt.label == cls;
          const bool in_pred = e.pred.hit && e.pred.label == cls;
          const bool is_tp =
              in_gt && in_pred && std::abs(e.pred.depth - e.gt.depth) <= t;
          tp += is_tp;
          fn += (in_gt && !is_tp);
          fp += (in_pred && !is_tp);
        }
        const std::size_t denom = tp + fp + fn;
        if (denom == 0) continue;
        sum += static_cast<double>(tp) / static_cast<double>(denom);
        ++counted;
      }
      const double want = counted ? sum / counted : 0.0;
      if (std::abs(ray_iou(evals, t, classes).mean - want) > 1e-9) return false;
    }
    // Perfect prediction must be exactly 1.
    const auto self = evaluate_rays(a.gt_current, a.gt_current, a.flow, a.flow, bundle);
    for (double t : {1.0, 2.0, 4.0}) {
      if (ray_iou(self, t, classes).mean != 1.0) return false;
    }
  }
  return true;
}

bool check_flow_gradients() {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const double h = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 8;
    const BinConfig cfg{n, -25.0, 25.0};
    Eigen::VectorXd logits(n), weights(n);
    for (int i = 0; i < n; ++i) {
      logits[i] = u(rng);
      weights[i] = u(rng);
    }
    weights = softmax(weights);
    const auto f_of = [&](const Eigen::VectorXd& l) {
      return aggregate_flow(bin_centers(softmax(l), cfg), weights);
    };
    const Eigen::VectorXd b = softmax(logits);
    const Eigen::VectorXd df_db =
        grad_bin_centers(b, cfg).transpose() * grad_aggregate(bin_centers(b, cfg), weights).first;
    const Eigen::VectorXd analytic = grad_through_softmax(logits, df_db);
    Eigen::VectorXd fd(n);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd lp = logits, lm = logits;
      lp[i] += h;
      lm[i] -= h;
      fd[i] = (f_of(lp) - f_of(lm)) / (2 * h);
    }
    const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-12);
    if ((analytic - fd).cwiseAbs().maxCoeff() / scale > 1e-6) return false;
  }
  return true;
}

bool check_warp_gradients() {
  std::mt19937 rng(11);
  const GridSpec spec{Eigen::Vector3d(0, 0, 0), 0.5, Eigen::Vector3i(5, 5, 3)};
  std::uniform_real_distribution<double> u(-1.0, 1.0), frac(0.1, 0.4);
  const double dt = 0.5, h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    FeatureGrid f = FeatureGrid::zeros(spec, 1), up = FeatureGrid::zeros(spec, 1);
    FlowField flow = FlowField::zeros(spec);
    for (std::size_t v = 0; v < spec.num_voxels(); ++v) {
      f.values[v] = u(rng);
      up.values[v] = u(rng);
      flow.set(v, Eigen::Vector2d(frac(rng), frac(rng)) * spec.voxel_size / dt);
    }
    const WarpGradient g = grad_warp(f, flow, dt, up);
    const auto loss = [&](const FlowField& fl) {
      const FeatureGrid out = warp_forward(f, fl, dt);
      double s = 0.0;
      for (std::size_t i = 0; i < out.values.size(); ++i) s += out.values[i] * up.values[i];
      return s;
    };
    std::uniform_int_distribution<std::size_t> pick(0, spec.num_voxels() - 1);
    for (int probe = 0; probe < 6; ++probe) {
      const std::size_t v = pick(rng);
      for (int axis = 0; axis < 2; ++axis) {
        FlowField fp = flow, fm = flow;
        fp.flow[2 * v + axis] += h;
        fm.flow[2 * v + axis] -= h;
        const double fd = (loss(fp) - loss(fm)) / (2 * h);
        const double a = g.d_flow.flow[2 * v + axis];
        if (std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-2}) > 1e-5) {
          return false;
        }
      }
    }
  }
  return true;
}

bool check_dilation() {
  const GridSpec spec{Eigen::Vector3d(0, 0, 0), 0.4, Eigen::Vector3i(16, 16, 8)};
  OccupancyGrid g = OccupancyGrid::all_free(spec);
  const Eigen::Vector3i hit(8, 8, 4);
  g.labels[spec.linear_index(hit)] = 1;
  const Eigen::Vector3d origin = voxel_to_world(spec, {0, 8, 4});
  const RayBundle b = generate_bundle({Pose{origin, 0.0}}, RayPattern{{0.0}, 1, 20.0});
  const VoxelMask v1 = visible_mask_v1(g, b);
  const VoxelMask v2 = visible_mask_v2(g, b, 2.0);
  for (std::size_t i = 0; i < v2.bits.size(); ++i) {
    const double d = (spec.unravel(i) - hit).cast<double>().norm() * spec.voxel_size;
    const bool want = d <= 2.0 || v1.test(i);
    if (v2.test(i) != want) return false;
  }
  return true;
}

bool check_occ_score() {
  return std::abs(occ_score(0.451, 0.529) - 0.453) <= 5e-4 &&
         std::abs((0.398 + 0.459 + 0.496) / 3.0 - 0.451) <= 5e-4 &&
         occ_score(1.0, 0.0) == 1.0 && std::abs(occ_score(0.5, 1.7) - 0.45) < 1e-12;
}

}  // namespace

int run_selftest() {
  bool ok = true;
  ok &= report("traversal vs marching oracle", check_traversal());
  ok &= report("ray IoU vs counting oracle", check_ray_iou());
  ok &= report("flow-head gradients vs finite differences", check_flow_gradients());
  ok &= report("warp gradients vs finite differences", check_warp_gradients());
  ok &= report("V2 dilation vs exhaustive distance scan", check_dilation());
  ok &= report("score aggregation arithmetic", check_occ_score());
  std::printf("selftest %s\n", ok ? "passed" : "FAILED");
  return ok ? 0 : 2;
}

}  // namespace occkit::tools
