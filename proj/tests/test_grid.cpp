#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "occkit/container.hpp"
#include "occkit/grid.hpp"

using namespace occkit;

namespace {

std::filesystem::path temp_path(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

GridSpec small_spec() {
  return GridSpec{Eigen::Vector3d(0, 0, 0), 0.5, Eigen::Vector3i(4, 4, 2)};
}

}  // namespace

TEST_CASE("voxel_to_world returns voxel centers") {
  const GridSpec d;  // challenge default
  CHECK(voxel_to_world(d, {0, 0, 0}).isApprox(Eigen::Vector3d(-39.8, -39.8, -0.8), 1e-12));
  CHECK(voxel_to_world(d, {199, 199, 15}).isApprox(Eigen::Vector3d(39.8, 39.8, 5.2), 1e-12));

  const GridSpec unit{Eigen::Vector3d(0, 0, 0), 1.0, Eigen::Vector3i(8, 8, 8)};
  CHECK(voxel_to_world(unit, {2, 3, 4}) == Eigen::Vector3d(2.5, 3.5, 4.5));

  CHECK_THROWS_AS(voxel_to_world(d, {200, 0, 0}), std::out_of_range);
  CHECK_THROWS_AS(voxel_to_world(d, {0, -1, 0}), std::out_of_range);
}

TEST_CASE("world_to_voxel floors and treats box as half-open") {
  const GridSpec d;
  CHECK(world_to_voxel(d, {-39.8, -39.8, -0.8}) == Eigen::Vector3i(0, 0, 0));
  CHECK_FALSE(world_to_voxel(d, {40.0, 0.0, 0.0}).has_value());

  const GridSpec half{Eigen::Vector3d(0, 0, 0), 0.5, Eigen::Vector3i(4, 4, 4)};
  CHECK(world_to_voxel(half, {0.99, 0.01, 0.49}) == Eigen::Vector3i(1, 0, 0));
}

TEST_CASE("coordinate transforms invert each other") {
  const GridSpec d;
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> ix(0, 199), iz(0, 15);
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Vector3i v(ix(rng), ix(rng), iz(rng));
    CHECK(world_to_voxel(d, voxel_to_world(d, v)) == v);
  }

  std::uniform_real_distribution<double> ux(-40.0, 40.0), uz(-1.0, 5.4);
  for (int k = 0; k < 10000; ++k) {
    const Eigen::Vector3d p(ux(rng), ux(rng), uz(rng));
    const auto v = world_to_voxel(d, p);
    REQUIRE(v.has_value());
    const Eigen::Vector3d c = voxel_to_world(d, *v);
    CHECK((c - p).cwiseAbs().maxCoeff() <= d.voxel_size / 2 + 1e-12);
  }
}

TEST_CASE("container round-trips are byte-identical") {
  std::mt19937 rng(11);
  const GridSpec spec = small_spec();

  SUBCASE("occupancy") {
    OccupancyGrid g = OccupancyGrid::all_free(spec);
    std::uniform_int_distribution<int> cls(0, 16);
    for (auto& l : g.labels) l = static_cast<std::uint8_t>(cls(rng));
    const auto p = temp_path("rt.occ");
    save_container(p, g);
    const OccupancyGrid back = load_occupancy(p);
    CHECK(back.labels == g.labels);
    CHECK(back.spec == g.spec);
    CHECK(back.free_class == g.free_class);

    // Saving the loaded copy reproduces the file exactly.
    const auto p2 = temp_path("rt2.occ");
    save_container(p2, back);
    std::ifstream a(p, std::ios::binary), b(p2, std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {});
    const std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
  }

  SUBCASE("flow") {
    FlowField f = FlowField::zeros(spec);
    std::uniform_real_distribution<float> u(-20.f, 20.f);
    for (auto& v : f.flow) v = u(rng);
    const auto p = temp_path("rt.flow");
    save_container(p, f);
    CHECK(load_flow(p).flow == f.flow);
  }

  SUBCASE("mask") {
    VoxelMask m = VoxelMask::empty(spec);
    for (std::size_t i = 0; i < m.bits.size(); i += 3) m.set(i);
    const auto p = temp_path("rt.mask");
    save_container(p, m);
    CHECK(load_mask(p).bits == m.bits);
  }

  SUBCASE("features") {
    FeatureGrid f = FeatureGrid::zeros(spec, 3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : f.values) v = u(rng);
    const auto p = temp_path("rt.feat");
    save_container(p, f);
    const FeatureGrid back = load_features(p);
    CHECK(back.values == f.values);
    CHECK(back.channels == 3);
  }
}

TEST_CASE("container rejects malformed files with distinct errors") {
  const auto p = temp_path("bad.occ");

  SUBCASE("bad magic") {
    std::ofstream(p, std::ios::binary) << "XXXXjunkjunkjunk";
    try {
      load_container(p);
      FAIL("expected throw");
    } catch (const ContainerException& e) {
      CHECK(e.code() == ContainerError::kBadMagic);
    }
  }

  SUBCASE("version mismatch") {
    const std::string h = R"({"kind":"mask","version":9,"dims":[1,1,1],"origin":[0,0,0],"voxel_size":1.0,"dtype":"u8"})";
    std::ofstream out(p, std::ios::binary);
    out << "OCCV";
    const std::uint32_t n = static_cast<std::uint32_t>(h.size());
    out.write(reinterpret_cast<const char*>(&n), 4);  // little-endian host
    out << h << '\0';
    out.close();
    try {
      load_container(p);
      FAIL("expected throw");
    } catch (const ContainerException& e) {
      CHECK(e.code() == ContainerError::kVersionMismatch);
    }
  }

  SUBCASE("truncated payload") {
    OccupancyGrid g = OccupancyGrid::all_free(
        GridSpec{Eigen::Vector3d(0, 0, 0), 1.0, Eigen::Vector3i(2, 2, 2)});
    save_container(p, g);
    // Drop the last payload byte: header says 8 labels, file holds 7.
    std::filesystem::resize_file(p, std::filesystem::file_size(p) - 1);
    try {
      load_container(p);
      FAIL("expected throw");
    } catch (const ContainerException& e) {
      CHECK(e.code() == ContainerError::kTruncated);
    }
  }

  SUBCASE("non-finite float payload") {
    FlowField f = FlowField::zeros(small_spec());
    f.flow[5] = std::numeric_limits<double>::quiet_NaN();
    const auto pf = temp_path("bad.flow");
    save_container(pf, f);
    try {
      load_container(pf);
      FAIL("expected throw");
    } catch (const ContainerException& e) {
      CHECK(e.code() == ContainerError::kNonFinite);
    }
  }

  SUBCASE("dtype mismatch") {
    // A flow header claiming u8 payload.
    const std::string h = R"({"kind":"flow","version":1,"dims":[1,1,1],"origin":[0,0,0],"voxel_size":1.0,"dtype":"u8"})";
    std::ofstream out(p, std::ios::binary);
    out << "OCCV";
    const std::uint32_t n = static_cast<std::uint32_t>(h.size());
    out.write(reinterpret_cast<const char*>(&n), 4);
    out << h;
    out.write("\0\0\0\0\0\0\0\0", 8);
    out.close();
    try {
      load_container(p);
      FAIL("expected throw");
    } catch (const ContainerException& e) {
      CHECK(e.code() == ContainerError::kDtypeMismatch);
    }
  }
}
