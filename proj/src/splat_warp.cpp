#include "occkit/splat_warp.hpp"

#include <cmath>
#include <stdexcept>

#include "occkit/parallel.hpp"

namespace occkit {
namespace {

// Full 8-cell neighborhood around (position - 0.5), zero-weight and
// out-of-bounds cells included; callers filter as needed.
struct RawNeighborhood {
  Eigen::Vector3i base;
  Eigen::Vector3d frac;
};

RawNeighborhood raw_neighborhood(const Eigen::Vector3d& position) {
  const Eigen::Vector3d shifted = position - Eigen::Vector3d::Constant(0.5);
  RawNeighborhood n;
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor(shifted[a]);
    n.base[a] = static_cast<int>(f);
    n.frac[a] = shifted[a] - f;
  }
  return n;
}

double corner_weight(const Eigen::Vector3d& frac, int cx, int cy, int cz) {
  const double wx = cx ? frac.x() : 1.0 - frac.x();
  const double wy = cy ? frac.y() : 1.0 - frac.y();
  const double wz = cz ? frac.z() : 1.0 - frac.z();
  return wx * wy * wz;
}

Eigen::Vector3d displaced_position(const GridSpec& spec, std::size_t linear,
                                   const Eigen::Vector2d& flow, double dt) {
  const Eigen::Vector3i idx = spec.unravel(linear);
  Eigen::Vector3d pos = idx.cast<double>() + Eigen::Vector3d::Constant(0.5);
  pos.x() += flow.x() * dt / spec.voxel_size;
  pos.y() += flow.y() * dt / spec.voxel_size;
  return pos;
}

void require_same_spec(const GridSpec& a, const GridSpec& b) {
  if (!(a == b)) throw std::invalid_argument("grid specs do not match");
}

// Contributor lists per target voxel, in ascending source order. Built
// once, then targets accumulate independently, so the summation order is
// fixed for any worker count.
struct ScatterPlan {
  std::vector<std::uint32_t> offsets;  // per target, size N+1
  std::vector<std::uint32_t> sources;
  std::vector<double> weights;
};

ScatterPlan build_plan(const GridSpec& spec, const FlowField& flow, double dt,
                       int threads) {
  const std::size_t n = spec.num_voxels();
  struct Entry {
    std::uint32_t target;
    double weight;
  };
  std::vector<std::array<Entry, 8>> per_source(n);
  std::vector<std::uint8_t> counts(n, 0);

  parallel_chunks(n, threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      const auto nb = raw_neighborhood(displaced_position(spec, v, flow.at(v), dt));
      int c = 0;
      for (int cx = 0; cx <= 1; ++cx) {
        for (int cy = 0; cy <= 1; ++cy) {
          for (int cz = 0; cz <= 1; ++cz) {
            const Eigen::Vector3i cell = nb.base + Eigen::Vector3i(cx, cy, cz);
            if (!spec.contains(cell)) continue;
            const double w = corner_weight(nb.frac, cx, cy, cz);
            if (w == 0.0) continue;
            per_source[v][c++] = {static_cast<std::uint32_t>(spec.linear_index(cell)), w};
          }
        }
      }
      counts[v] = static_cast<std::uint8_t>(c);
    }
  });

  ScatterPlan plan;
  std::vector<std::uint32_t> per_target(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    for (int k = 0; k < counts[v]; ++k) ++per_target[per_source[v][k].target];
  }
  plan.offsets.resize(n + 1, 0);
  for (std::size_t t = 0; t < n; ++t) plan.offsets[t + 1] = plan.offsets[t] + per_target[t];
  plan.sources.resize(plan.offsets[n]);
  plan.weights.resize(plan.offsets[n]);
  std::vector<std::uint32_t> cursor(plan.offsets.begin(), plan.offsets.end() - 1);
  for (std::size_t v = 0; v < n; ++v) {
    for (int k = 0; k < counts[v]; ++k) {
      const auto& e = per_source[v][k];
      const std::uint32_t slot = cursor[e.target]++;
      plan.sources[slot] = static_cast<std::uint32_t>(v);
      plan.weights[slot] = e.weight;
    }
  }
  return plan;
}

}  // namespace

SplatNeighborhood splat_weights(const GridSpec& spec, const Eigen::Vector3d& position) {
  if (!position.allFinite()) throw std::invalid_argument("non-finite splat position");
  const auto nb = raw_neighborhood(position);
  SplatNeighborhood out;
  for (int cx = 0; cx <= 1; ++cx) {
    for (int cy = 0; cy <= 1; ++cy) {
      for (int cz = 0; cz <= 1; ++cz) {
        const Eigen::Vector3i cell = nb.base + Eigen::Vector3i(cx, cy, cz);
        if (!spec.contains(cell)) continue;
        const double w = corner_weight(nb.frac, cx, cy, cz);
        if (w == 0.0) continue;
        out.entries[out.count++] = {cell, w};
      }
    }
  }
  return out;
}

FeatureGrid splat(const std::vector<SplatSample>& samples, const GridSpec& spec,
                  int channels) {
  FeatureGrid grid = FeatureGrid::zeros(spec, channels);
  for (const SplatSample& s : samples) {
    if (s.value.size() != channels) throw std::invalid_argument("sample channel mismatch");
    const SplatNeighborhood nb = splat_weights(spec, s.position);
    for (int k = 0; k < nb.count; ++k) {
      double* cell = grid.at(spec.linear_index(nb.entries[k].voxel));
      for (int c = 0; c < channels; ++c) cell[c] += nb.entries[k].weight * s.value[c];
    }
  }
  return grid;
}

FeatureGrid warp_forward(const FeatureGrid& features, const FlowField& flow,
                         double dt, int threads) {
  require_same_spec(features.spec, flow.spec);
  if (dt <= 0) throw std::invalid_argument("dt must be positive");

  const ScatterPlan plan = build_plan(features.spec, flow, dt, threads);
  const std::size_t n = features.spec.num_voxels();
  const int C = features.channels;
  FeatureGrid out = FeatureGrid::zeros(features.spec, C);

  parallel_chunks(n, threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      double* cell = out.at(t);
      for (std::uint32_t k = plan.offsets[t]; k < plan.offsets[t + 1]; ++k) {
        const double w = plan.weights[k];
        const double* src = features.at(plan.sources[k]);
        for (int c = 0; c < C; ++c) cell[c] += w * src[c];
      }
    }
  });
  return out;
}

FeatureGrid warp_occupancy(const OccupancyGrid& current, const FlowField& flow,
                           double dt, int threads) {
  require_same_spec(current.spec, flow.spec);
  FeatureGrid onehot = FeatureGrid::zeros(current.spec, current.num_classes);
  for (std::size_t v = 0; v < current.labels.size(); ++v) {
    if (current.labels[v] != current.free_class) {
      onehot.at(v)[current.labels[v]] = 1.0;
    }
  }
  return warp_forward(onehot, flow, dt, threads);
}

double warp_score(const FeatureGrid& warped, const OccupancyGrid& gt_future,
                  double eps, const VoxelMask* mask) {
  require_same_spec(warped.spec, gt_future.spec);
  if (warped.channels != gt_future.num_classes) {
    throw std::invalid_argument("warped channels must equal num_classes");
  }
  const int C = warped.channels;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t v = 0; v < gt_future.labels.size(); ++v) {
    if (gt_future.labels[v] == gt_future.free_class) continue;
    if (mask && !mask->test(v)) continue;
    const double* m = warped.at(v);
    double mass = 0.0;
    for (int c = 0; c < C; ++c) mass += m[c];
    const double denom = mass + C * eps;
    const double q = (m[gt_future.labels[v]] + eps) / denom;
    total += -std::log(q);
    ++count;
  }
  if (count == 0) throw std::invalid_argument("no occupied voxels in gt_future");
  return total / static_cast<double>(count);
}

WarpGradient grad_warp(const FeatureGrid& features, const FlowField& flow, double dt,
                       const FeatureGrid& upstream) {
  require_same_spec(features.spec, flow.spec);
  require_same_spec(features.spec, upstream.spec);
  if (features.channels != upstream.channels) {
    throw std::invalid_argument("upstream channel mismatch");
  }
  const GridSpec& spec = features.spec;
  const int C = features.channels;
  const double scale = dt / spec.voxel_size;  // d position / d flow

  WarpGradient grad{FeatureGrid::zeros(spec, C), FlowField::zeros(spec)};

  for (std::size_t v = 0; v < spec.num_voxels(); ++v) {
    const auto nb = raw_neighborhood(displaced_position(spec, v, flow.at(v), dt));
    const double* value = features.at(v);
    double* dfeat = grad.d_features.at(v);
    double dfx = 0.0, dfy = 0.0;
    for (int cx = 0; cx <= 1; ++cx) {
      const double wx = cx ? nb.frac.x() : 1.0 - nb.frac.x();
      const double dwx = cx ? 1.0 : -1.0;
      for (int cy = 0; cy <= 1; ++cy) {
        const double wy = cy ? nb.frac.y() : 1.0 - nb.frac.y();
        const double dwy = cy ? 1.0 : -1.0;
        for (int cz = 0; cz <= 1; ++cz) {
          const Eigen::Vector3i cell = nb.base + Eigen::Vector3i(cx, cy, cz);
          if (!spec.contains(cell)) continue;
          const double wz = cz ? nb.frac.z() : 1.0 - nb.frac.z();
          const double* up = upstream.at(spec.linear_index(cell));
          double inner = 0.0;  // <value, upstream at cell>
          for (int c = 0; c < C; ++c) {
            inner += value[c] * up[c];
            dfeat[c] += wx * wy * wz * up[c];
          }
          dfx += dwx * wy * wz * inner;
          dfy += wx * dwy * wz * inner;
        }
      }
    }
    grad.d_flow.set(v, Eigen::Vector2d(dfx * scale, dfy * scale));
  }
  return grad;
}

}  // namespace occkit
