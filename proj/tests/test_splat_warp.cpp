#include <doctest.h>

#include <random>

#include "occkit/splat_warp.hpp"
#include "oracles.hpp"

using namespace occkit;

namespace {

GridSpec spec_663() {
  return GridSpec{Eigen::Vector3d(0, 0, 0), 0.5, Eigen::Vector3i(6, 6, 3)};
}

Eigen::VectorXd scalar(double v) {
  Eigen::VectorXd out(1);
  out << v;
  return out;
}

double channel_mass(const FeatureGrid& g, int c) {
  double m = 0.0;
  for (std::size_t v = 0; v < g.spec.num_voxels(); ++v) m += g.at(v)[c];
  return m;
}

FeatureGrid random_features(const GridSpec& spec, int channels, std::mt19937& rng) {
  FeatureGrid f = FeatureGrid::zeros(spec, channels);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : f.values) v = u(rng);
  return f;
}

// Sub-voxel flow keeping every 8-neighborhood inside the grid and positions
// clear of lattice planes.
FlowField random_interior_flow(const GridSpec& spec, std::mt19937& rng, double dt) {
  FlowField flow = FlowField::zeros(spec);
  std::uniform_real_distribution<double> u(0.1, 0.4);
  for (std::size_t v = 0; v < spec.num_voxels(); ++v) {
    flow.set(v, Eigen::Vector2d(u(rng), u(rng)) * spec.voxel_size / dt);
  }
  return flow;
}

}  // namespace

TEST_CASE("splat_weights") {
  const GridSpec spec{Eigen::Vector3d(0, 0, 0), 1.0, Eigen::Vector3i(8, 8, 8)};

  SUBCASE("a voxel center gets a single unit weight") {
    const auto nb = splat_weights(spec, {2.5, 3.5, 4.5});
    REQUIRE(nb.count == 1);
    CHECK(nb.entries[0].voxel == Eigen::Vector3i(2, 3, 4));
    CHECK(nb.entries[0].weight == 1.0);
  }

  SUBCASE("a cube center spreads 8 x 0.125") {
    const auto nb = splat_weights(spec, {3.0, 3.0, 3.0});
    REQUIRE(nb.count == 8);
    for (int k = 0; k < 8; ++k) CHECK(nb.entries[k].weight == doctest::Approx(0.125));
  }

  SUBCASE("weights are per-axis fraction products and sum to 1") {
    const auto nb = splat_weights(spec, {1.25, 2.75, 0.5});
    double sum = 0.0;
    for (int k = 0; k < nb.count; ++k) {
      const auto& e = nb.entries[k];
      const Eigen::Vector3d frac(0.75, 0.25, 0.0);  // of (position - 0.5) = (0.75, 2.25, 0.0)
      double want = 1.0;
      const Eigen::Vector3i base(0, 2, 0);
      for (int a = 0; a < 3; ++a) {
        const int off = e.voxel[a] - base[a];
        want *= off ? frac[a] : 1.0 - frac[a];
      }
      CHECK(e.weight == doctest::Approx(want).epsilon(1e-14));
      sum += e.weight;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("in-bounds weights sum to 1 when the full neighborhood is inside") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(1.0, 7.0);
    for (int k = 0; k < 200; ++k) {
      const auto nb = splat_weights(spec, {u(rng), u(rng), u(rng)});
      double sum = 0.0;
      for (int i = 0; i < nb.count; ++i) {
        CHECK(nb.entries[i].weight >= 0.0);
        CHECK(nb.entries[i].weight <= 1.0);
        sum += nb.entries[i].weight;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }

  SUBCASE("out-of-bounds neighbors are dropped") {
    const auto nb = splat_weights(spec, {0.25, 4.0, 4.0});  // base x = -1
    double sum = 0.0;
    for (int i = 0; i < nb.count; ++i) sum += nb.entries[i].weight;
    CHECK(sum < 1.0);
  }
}

TEST_CASE("splat") {
  const GridSpec spec = spec_663();

  SUBCASE("single center sample lands in one cell") {
    const FeatureGrid g = splat({{{1.5, 2.5, 0.5}, scalar(3.0)}}, spec, 1);
    CHECK(g.at(spec.linear_index(1, 2, 0))[0] == 3.0);
    CHECK(channel_mass(g, 0) == 3.0);
  }

  SUBCASE("splat is linear: doubled sample doubles the grid") {
    const SplatSample s{{1.3, 2.6, 1.1}, scalar(2.0)};
    const FeatureGrid one = splat({s}, spec, 1);
    const FeatureGrid two = splat({s, s}, spec, 1);
    for (std::size_t v = 0; v < spec.num_voxels(); ++v) {
      CHECK(two.at(v)[0] == doctest::Approx(2.0 * one.at(v)[0]).epsilon(1e-14));
    }
  }

  SUBCASE("random samples: grid mass equals the sequential accumulation oracle") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> pos(-0.5, 6.5), val(-2.0, 2.0);
    std::vector<SplatSample> samples;
    double want_mass = 0.0;
    for (int k = 0; k < 100; ++k) {
      SplatSample s{{pos(rng), pos(rng), pos(rng) / 2}, scalar(val(rng))};
      const auto nb = splat_weights(spec, s.position);
      double wsum = 0.0;
      for (int i = 0; i < nb.count; ++i) wsum += nb.entries[i].weight;
      want_mass += s.value[0] * wsum;
      samples.push_back(std::move(s));
    }
    const FeatureGrid g = splat(samples, spec, 1);
    CHECK(channel_mass(g, 0) == doctest::Approx(want_mass).epsilon(1e-12));
  }

  CHECK_THROWS(splat({{{1, 1, 1}, Eigen::VectorXd::Zero(2)}}, spec, 1));
}

TEST_CASE("warp_forward") {
  const GridSpec spec = spec_663();
  std::mt19937 rng(13);

  SUBCASE("zero flow is the bitwise identity") {
    const FeatureGrid f = random_features(spec, 3, rng);
    const FeatureGrid out = warp_forward(f, FlowField::zeros(spec), 0.5);
    CHECK(out.values == f.values);
  }

  SUBCASE("one-pitch uniform flow shifts by exactly one cell in +x") {
    const FeatureGrid f = random_features(spec, 2, rng);
    FlowField flow = FlowField::zeros(spec);
    for (std::size_t v = 0; v < spec.num_voxels(); ++v) {
      flow.set(v, {1.0, 0.0});  // 1.0 m/s * 0.5 s = 0.5 m = one voxel
    }
    const FeatureGrid out = warp_forward(f, flow, 0.5);
    for (int x = 0; x < 6; ++x) {
      for (int y = 0; y < 6; ++y) {
        for (int z = 0; z < 3; ++z) {
          const double* got = out.at(spec.linear_index(x, y, z));
          for (int c = 0; c < 2; ++c) {
            const double want =
                x == 0 ? 0.0 : f.at(spec.linear_index(x - 1, y, z))[c];
            CHECK(got[c] == want);
          }
        }
      }
    }
  }

  SUBCASE("random sub-voxel flow matches the direct scatter oracle") {
    const FeatureGrid f = random_features(spec, 2, rng);
    const FlowField flow = random_interior_flow(spec, rng, 0.5);
    const FeatureGrid got = warp_forward(f, flow, 0.5);

    FeatureGrid want = FeatureGrid::zeros(spec, 2);
    for (std::size_t v = 0; v < spec.num_voxels(); ++v) {
      const Eigen::Vector3i idx = spec.unravel(v);
      Eigen::Vector3d p = idx.cast<double>() + Eigen::Vector3d::Constant(0.5);
      p.x() += flow.at(v).x() * 0.5 / spec.voxel_size;
      p.y() += flow.at(v).y() * 0.5 / spec.voxel_size;
      const auto nb = splat_weights(spec, p);
      for (int k = 0; k < nb.count; ++k) {
        double* cell = want.at(spec.linear_index(nb.entries[k].voxel));
        for (int c = 0; c < 2; ++c) cell[c] += nb.entries[k].weight * f.at(v)[c];
      }
    }
    for (std::size_t i = 0; i < got.values.size(); ++i) {
      CHECK(got.values[i] == doctest::Approx(want.values[i]).epsilon(1e-12));
    }
  }

  SUBCASE("mass is conserved when no neighborhood exits the grid") {
    // Occupy only the interior so displaced neighborhoods stay inside.
    FeatureGrid f = FeatureGrid::zeros(spec, 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int x = 1; x < 5; ++x) {
      for (int y = 1; y < 5; ++y) f.at(spec.linear_index(x, y, 1))[0] = u(rng);
    }
    const FlowField flow = random_interior_flow(spec, rng, 0.5);
    const FeatureGrid out = warp_forward(f, flow, 0.5);
    CHECK(channel_mass(out, 0) == doctest::Approx(channel_mass(f, 0)).epsilon(1e-12));
  }

  SUBCASE("warp is identical across worker counts") {
    const FeatureGrid f = random_features(spec, 2, rng);
    const FlowField flow = random_interior_flow(spec, rng, 0.5);
    CHECK(warp_forward(f, flow, 0.5, 1).values == warp_forward(f, flow, 0.5, 8).values);
  }

  SUBCASE("continuity in flow: output change is O(perturbation)") {
    const FeatureGrid f = random_features(spec, 1, rng);
    const FlowField flow = random_interior_flow(spec, rng, 0.5);
    const FeatureGrid base = warp_forward(f, flow, 0.5);
    double prev_change = std::numeric_limits<double>::infinity();
    for (double delta : {1e-2, 1e-3, 1e-4}) {
      FlowField perturbed = flow;
      for (auto& v : perturbed.flow) v += delta;
      const FeatureGrid out = warp_forward(f, perturbed, 0.5);
      double change = 0.0;
      for (std::size_t i = 0; i < out.values.size(); ++i) {
        change = std::max(change, std::abs(out.values[i] - base.values[i]));
      }
      CHECK(change < prev_change);
      CHECK(change <= 10.0 * delta);  // Lipschitz-style bound
      prev_change = change;
    }
  }
}

TEST_CASE("warp_occupancy") {
  const GridSpec spec = spec_663();

  SUBCASE("static scene with zero flow reproduces the one-hot encoding") {
    OccupancyGrid g = OccupancyGrid::all_free(spec);
    g.labels[spec.linear_index(2, 3, 1)] = 4;
    g.labels[spec.linear_index(1, 1, 0)] = 9;
    const FeatureGrid soft = warp_occupancy(g, FlowField::zeros(spec), 0.5);
    for (std::size_t v = 0; v < spec.num_voxels(); ++v) {
      for (int c = 0; c < g.num_classes; ++c) {
        const double want = (g.labels[v] != g.free_class && g.labels[v] == c) ? 1.0 : 0.0;
        CHECK(soft.at(v)[c] == want);
      }
    }
  }

  SUBCASE("a single voxel moving one pitch lands one cell over in +y") {
    OccupancyGrid g = OccupancyGrid::all_free(spec);
    g.labels[spec.linear_index(2, 2, 1)] = 4;
    FlowField flow = FlowField::zeros(spec);
    flow.set(spec.linear_index(2, 2, 1), {0.0, 1.0});
    const FeatureGrid soft = warp_occupancy(g, flow, 0.5);
    CHECK(soft.at(spec.linear_index(2, 3, 1))[4] == 1.0);
    CHECK(soft.at(spec.linear_index(2, 2, 1))[4] == 0.0);
  }

  SUBCASE("per-class mass is conserved up to boundary loss") {
    std::mt19937 rng(17);
    OccupancyGrid g = OccupancyGrid::all_free(spec);
    std::uniform_int_distribution<int> cls(0, 15);
    for (int x = 1; x < 5; ++x) {
      for (int y = 1; y < 5; ++y) {
        g.labels[spec.linear_index(x, y, 1)] = static_cast<std::uint8_t>(cls(rng));
      }
    }
    const FlowField flow = random_interior_flow(spec, rng, 0.5);
    const FeatureGrid soft = warp_occupancy(g, flow, 0.5);
    std::vector<double> want(g.num_classes, 0.0);
    for (std::size_t v = 0; v < spec.num_voxels(); ++v) {
      if (g.labels[v] != g.free_class) want[g.labels[v]] += 1.0;
    }
    for (int c = 0; c < g.num_classes; ++c) {
      CHECK(channel_mass(soft, c) == doctest::Approx(want[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("warp_score") {
  const GridSpec spec = spec_663();
  OccupancyGrid future = OccupancyGrid::all_free(spec);
  future.labels[spec.linear_index(2, 2, 1)] = 4;
  future.labels[spec.linear_index(3, 3, 1)] = 7;

  SUBCASE("exact one-hot mass matches: score tends to 0 with epsilon") {
    FeatureGrid warped = FeatureGrid::zeros(spec, 17);
    warped.at(spec.linear_index(2, 2, 1))[4] = 1.0;
    warped.at(spec.linear_index(3, 3, 1))[7] = 1.0;
    CHECK(warp_score(warped, future, 1e-12) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(warp_score(warped, future, 1e-6) < 1e-4);
  }

  SUBCASE("uniform mass scores ln K per voxel") {
    FeatureGrid warped = FeatureGrid::zeros(spec, 17);
    for (std::size_t v = 0; v < spec.num_voxels(); ++v) {
      for (int c = 0; c < 17; ++c) warped.at(v)[c] = 1.0 / 17.0;
    }
    CHECK(warp_score(warped, future) == doctest::Approx(std::log(17.0)).epsilon(1e-6));
  }

  SUBCASE("random case matches the direct per-voxel oracle") {
    std::mt19937 rng(19);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    FeatureGrid warped = FeatureGrid::zeros(spec, 17);
    for (auto& v : warped.values) v = u(rng);
    const double eps = 1e-6;
    double want = 0.0;
    int n = 0;
    for (std::size_t v = 0; v < spec.num_voxels(); ++v) {
      if (future.labels[v] == future.free_class) continue;
      double mass = 0.0;
      for (int c = 0; c < 17; ++c) mass += warped.at(v)[c];
      want += -std::log((warped.at(v)[future.labels[v]] + eps) / (mass + 17 * eps));
      ++n;
    }
    CHECK(warp_score(warped, future, eps) == doctest::Approx(want / n).epsilon(1e-12));
  }

  SUBCASE("no occupied future voxels is an error") {
    const OccupancyGrid empty = OccupancyGrid::all_free(spec);
    CHECK_THROWS(warp_score(FeatureGrid::zeros(spec, 17), empty));
  }
}

TEST_CASE("grad_warp") {
  const GridSpec spec = spec_663();
  std::mt19937 rng(23);

  SUBCASE("zero upstream gradient gives zero gradients") {
    const FeatureGrid f = random_features(spec, 2, rng);
    const FlowField flow = random_interior_flow(spec, rng, 0.5);
    const WarpGradient g = grad_warp(f, flow, 0.5, FeatureGrid::zeros(spec, 2));
    for (double v : g.d_features.values) CHECK(v == 0.0);
    for (double v : g.d_flow.flow) CHECK(v == 0.0);
  }

  SUBCASE("zero flow: feature gradient is the upstream grid") {
    const FeatureGrid f = random_features(spec, 2, rng);
    const FeatureGrid upstream = random_features(spec, 2, rng);
    const WarpGradient g = grad_warp(f, FlowField::zeros(spec), 0.5, upstream);
    CHECK(g.d_features.values == upstream.values);
  }

  SUBCASE("matches central finite differences on random cases") {
    const double dt = 0.5;
    const double h = 1e-6;
    double max_rel_feat = 0.0, max_rel_flow = 0.0;

    for (int trial = 0; trial < 50; ++trial) {
      const FeatureGrid f = random_features(spec, 1, rng);
      const FlowField flow = random_interior_flow(spec, rng, dt);
      const FeatureGrid upstream = random_features(spec, 1, rng);
      const WarpGradient g = grad_warp(f, flow, dt, upstream);

      const auto loss = [&](const FeatureGrid& feats, const FlowField& fl) {
        const FeatureGrid out = warp_forward(feats, fl, dt);
        double s = 0.0;
        for (std::size_t i = 0; i < out.values.size(); ++i) {
          s += out.values[i] * upstream.values[i];
        }
        return s;
      };

      // Probe a handful of random coordinates per trial.
      std::uniform_int_distribution<std::size_t> pick(0, spec.num_voxels() - 1);
      for (int probe = 0; probe < 5; ++probe) {
        const std::size_t v = pick(rng);

        FeatureGrid fp = f, fm = f;
        fp.values[v] += h;
        fm.values[v] -= h;
        const double fd_feat = (loss(fp, flow) - loss(fm, flow)) / (2 * h);
        const double a_feat = g.d_features.values[v];
        max_rel_feat =
            std::max(max_rel_feat, std::abs(a_feat - fd_feat) /
                                       std::max({std::abs(fd_feat), std::abs(a_feat), 1e-2}));

        for (int axis = 0; axis < 2; ++axis) {
          FlowField flp = flow, flm = flow;
          flp.flow[2 * v + axis] += h;
          flm.flow[2 * v + axis] -= h;
          const double fd = (loss(f, flp) - loss(f, flm)) / (2 * h);
          const double analytic = g.d_flow.flow[2 * v + axis];
          const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-2});
          max_rel_flow = std::max(max_rel_flow, std::abs(analytic - fd) / denom);
        }
      }
    }
    CHECK(max_rel_feat <= 1e-5);
    CHECK(max_rel_flow <= 1e-5);
  }
}
