#include "occkit/container.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace occkit {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'O', 'C', 'C', 'V'};
constexpr int kVersion = 1;

void write_u32_le(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw ContainerException(ContainerError::kTruncated, "truncated length field");
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) |
         (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
}

json spec_header(const GridSpec& spec, const char* kind, const char* dtype) {
  return json{{"kind", kind},
              {"version", kVersion},
              {"dims", {spec.dims.x(), spec.dims.y(), spec.dims.z()}},
              {"origin", {spec.origin.x(), spec.origin.y(), spec.origin.z()}},
              {"voxel_size", spec.voxel_size},
              {"dtype", dtype}};
}

void write_file(const std::filesystem::path& path, const json& header,
                const void* payload, std::size_t bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContainerException(ContainerError::kIo, "cannot open for write: " + path.string());
  const std::string h = header.dump();
  out.write(kMagic, 4);
  write_u32_le(out, static_cast<std::uint32_t>(h.size()));
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(static_cast<const char*>(payload), static_cast<std::streamsize>(bytes));
  if (!out) throw ContainerException(ContainerError::kIo, "write failed: " + path.string());
}

struct Parsed {
  json header;
  std::vector<char> payload;
};

Parsed read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContainerException(ContainerError::kIo, "cannot open: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw ContainerException(ContainerError::kBadMagic, "bad magic in " + path.string());
  }
  const std::uint32_t hlen = read_u32_le(in);
  std::string htext(hlen, '\0');
  in.read(htext.data(), hlen);
  if (!in) throw ContainerException(ContainerError::kTruncated, "truncated header");
  json header;
  try {
    header = json::parse(htext);
  } catch (const json::exception& e) {
    throw ContainerException(ContainerError::kBadHeader, std::string("header parse: ") + e.what());
  }
  if (!header.contains("version") || header["version"].get<int>() != kVersion) {
    throw ContainerException(ContainerError::kVersionMismatch, "unsupported container version");
  }
  Parsed p;
  p.header = std::move(header);
  p.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return p;
}

GridSpec spec_from_header(const json& h) {
  try {
    GridSpec s;
    const auto& d = h.at("dims");
    const auto& o = h.at("origin");
    s.dims = {d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
    s.origin = {o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()};
    s.voxel_size = h.at("voxel_size").get<double>();
    if (s.voxel_size <= 0 || (s.dims.array() < 1).any()) {
      throw ContainerException(ContainerError::kBadHeader, "invalid spec values");
    }
    return s;
  } catch (const json::exception& e) {
    throw ContainerException(ContainerError::kBadHeader, std::string("header: ") + e.what());
  }
}

void require_dtype(const json& h, const char* expect) {
  const std::string dt = h.value("dtype", "");
  if (dt != expect) {
    throw ContainerException(ContainerError::kDtypeMismatch,
                             "dtype '" + dt + "' does not match kind (want " + expect + ")");
  }
}

void require_payload_size(const Parsed& p, std::size_t expect_bytes) {
  if (p.payload.size() != expect_bytes) {
    throw ContainerException(
        ContainerError::kTruncated,
        "payload size " + std::to_string(p.payload.size()) + " != expected " +
            std::to_string(expect_bytes));
  }
}

template <typename T>
std::vector<T> payload_as(const Parsed& p, std::size_t count) {
  require_payload_size(p, count * sizeof(T));
  std::vector<T> out(count);
  std::memcpy(out.data(), p.payload.data(), p.payload.size());
  return out;
}

void require_finite(const double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(v[i])) {
      throw ContainerException(ContainerError::kNonFinite, "non-finite value in payload");
    }
  }
}

OccupancyGrid parse_occupancy(const Parsed& p) {
  require_dtype(p.header, "u8");
  OccupancyGrid g;
  g.spec = spec_from_header(p.header);
  g.num_classes = p.header.value("num_classes", 17);
  g.free_class = static_cast<std::uint8_t>(p.header.value("free_class", 16));
  g.labels = payload_as<std::uint8_t>(p, g.spec.num_voxels());
  for (std::uint8_t l : g.labels) {
    if (l >= g.num_classes) {
      throw ContainerException(ContainerError::kBadHeader,
                               "label " + std::to_string(l) + " >= num_classes");
    }
  }
  return g;
}

FlowField parse_flow(const Parsed& p) {
  require_dtype(p.header, "f32");
  FlowField f;
  f.spec = spec_from_header(p.header);
  const auto raw = payload_as<float>(p, f.spec.num_voxels() * 2);
  f.flow.assign(raw.begin(), raw.end());
  require_finite(f.flow.data(), f.flow.size());
  return f;
}

VoxelMask parse_mask(const Parsed& p) {
  require_dtype(p.header, "u8");
  VoxelMask m;
  m.spec = spec_from_header(p.header);
  m.bits = payload_as<std::uint8_t>(p, m.spec.num_voxels());
  return m;
}

FeatureGrid parse_features(const Parsed& p) {
  require_dtype(p.header, "f64");
  FeatureGrid f;
  f.spec = spec_from_header(p.header);
  f.channels = p.header.value("channels", 1);
  if (f.channels < 1) {
    throw ContainerException(ContainerError::kBadHeader, "channels < 1");
  }
  f.values = payload_as<double>(p, f.spec.num_voxels() * f.channels);
  require_finite(f.values.data(), f.values.size());
  return f;
}

}  // namespace

void save_container(const std::filesystem::path& path, const OccupancyGrid& g) {
  json h = spec_header(g.spec, "occ", "u8");
  h["num_classes"] = g.num_classes;
  h["free_class"] = g.free_class;
  write_file(path, h, g.labels.data(), g.labels.size());
}

void save_container(const std::filesystem::path& path, const FlowField& f) {
  std::vector<float> raw(f.flow.begin(), f.flow.end());
  write_file(path, spec_header(f.spec, "flow", "f32"), raw.data(),
             raw.size() * sizeof(float));
}

void save_container(const std::filesystem::path& path, const VoxelMask& m) {
  write_file(path, spec_header(m.spec, "mask", "u8"), m.bits.data(), m.bits.size());
}

void save_container(const std::filesystem::path& path, const FeatureGrid& f) {
  json h = spec_header(f.spec, "feat", "f64");
  h["channels"] = f.channels;
  write_file(path, h, f.values.data(), f.values.size() * sizeof(double));
}

Container load_container(const std::filesystem::path& path) {
  const Parsed p = read_file(path);
  const std::string kind = p.header.value("kind", "");
  if (kind == "occ") return parse_occupancy(p);
  if (kind == "flow") return parse_flow(p);
  if (kind == "mask") return parse_mask(p);
  if (kind == "feat") return parse_features(p);
  throw ContainerException(ContainerError::kBadHeader, "unknown kind '" + kind + "'");
}

namespace {
template <typename T>
T load_as(const std::filesystem::path& path, const char* want) {
  Container c = load_container(path);
  if (auto* p = std::get_if<T>(&c)) return std::move(*p);
  throw ContainerException(ContainerError::kBadHeader,
                           std::string("container is not of kind ") + want);
}
}  // namespace

OccupancyGrid load_occupancy(const std::filesystem::path& path) {
  return load_as<OccupancyGrid>(path, "occ");
}
FlowField load_flow(const std::filesystem::path& path) {
  return load_as<FlowField>(path, "flow");
}
VoxelMask load_mask(const std::filesystem::path& path) {
  return load_as<VoxelMask>(path, "mask");
}
FeatureGrid load_features(const std::filesystem::path& path) {
  return load_as<FeatureGrid>(path, "feat");
}

}  // namespace occkit
