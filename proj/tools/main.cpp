#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "occkit/container.hpp"
#include "occkit/flow_math.hpp"
#include "occkit/metrics.hpp"
#include "occkit/parallel.hpp"
#include "occkit/raycast.hpp"
#include "occkit/splat_warp.hpp"
#include "occkit/synth.hpp"
#include "selftest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace occkit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path.string());
  out << text;
}

// Flags beat the config file; the config file beats built-in defaults.
struct ConfigFile {
  json data = json::object();

  void load(const std::string& path) {
    if (!path.empty()) data = json::parse(read_text(path));
  }

  template <typename T>
  void apply(const CLI::Option* opt, const char* key, T& value) const {
    if (opt->count() == 0 && data.contains(key)) value = data[key].get<T>();
  }
};

int resolve_threads_flag(const CLI::Option* opt, int flag_value, const ConfigFile& cfg) {
  if (opt->count() > 0) return flag_value;
  if (cfg.data.contains("threads")) return cfg.data["threads"].get<int>();
  if (const char* env = std::getenv("OCCKIT_THREADS")) return std::atoi(env);
  return flag_value;
}

// ---- synth ----------------------------------------------------------------

int run_synth(std::uint64_t seed, const std::string& config_path,
              const std::string& out_dir, const CLI::Option* seed_opt) {
  ConfigFile cfg;
  cfg.load(config_path);

  SynthConfig sc;
  sc.seed = seed;
  if (seed_opt->count() == 0 && cfg.data.contains("seed")) {
    sc.seed = cfg.data["seed"].get<std::uint64_t>();
  }
  if (cfg.data.contains("dims")) {
    const auto d = cfg.data["dims"].get<std::vector<int>>();
    sc.spec.dims = {d.at(0), d.at(1), d.at(2)};
  }
  if (cfg.data.contains("origin")) {
    const auto o = cfg.data["origin"].get<std::vector<double>>();
    sc.spec.origin = {o.at(0), o.at(1), o.at(2)};
  }
  if (cfg.data.contains("voxel_size")) sc.spec.voxel_size = cfg.data["voxel_size"];
  if (cfg.data.contains("n_boxes")) sc.n_boxes = cfg.data["n_boxes"];
  if (cfg.data.contains("class_pool")) {
    sc.class_pool = cfg.data["class_pool"].get<std::vector<std::uint8_t>>();
  }
  if (cfg.data.contains("v_min")) sc.v_min = cfg.data["v_min"];
  if (cfg.data.contains("v_max")) sc.v_max = cfg.data["v_max"];
  if (cfg.data.contains("ground_plane")) sc.ground_plane = cfg.data["ground_plane"];
  if (cfg.data.contains("dt")) sc.dt = cfg.data["dt"];

  const SynthScene scene = synth_scene(sc);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  save_container(dir / "gt_current.occ", scene.gt_current);
  save_container(dir / "gt_future.occ", scene.gt_future);
  save_container(dir / "flow.flow", scene.flow);

  RayPattern pattern = RayPattern::default_lidar();
  if (cfg.data.contains("pattern")) {
    const auto& p = cfg.data["pattern"];
    pattern.elevations = p.at("elevations").get<std::vector<double>>();
    pattern.azimuth_count = p.at("azimuth_count");
    pattern.max_range = p.at("max_range");
  }
  write_text(dir / "bundle.json", bundle_to_json(generate_bundle(scene.trajectory, pattern)));
  std::cout << "wrote gt_current.occ gt_future.occ flow.flow bundle.json to " << out_dir
            << "\n";
  return kExitOk;
}

// ---- gen-mask ---------------------------------------------------------------

int run_gen_mask(const std::string& gt_path, const std::string& bundle_path,
                 const std::string& pattern_path, double dilate, bool dilate_given,
                 const std::string& out_path, int threads) {
  const OccupancyGrid gt = load_occupancy(gt_path);
  RayBundle bundle = bundle_from_json(read_text(bundle_path));
  if (!pattern_path.empty()) {
    const json p = json::parse(read_text(pattern_path));
    RayPattern pattern;
    pattern.elevations = p.at("elevations").get<std::vector<double>>();
    pattern.azimuth_count = p.at("azimuth_count");
    pattern.max_range = p.at("max_range");
    Trajectory traj;
    for (const auto& o : bundle.origins) traj.push_back(Pose{o, 0.0});
    bundle = generate_bundle(traj, pattern);
  }
  const VoxelMask mask = dilate_given ? visible_mask_v2(gt, bundle, dilate, threads)
                                      : visible_mask_v1(gt, bundle, threads);
  save_container(out_path, mask);
  std::cout << "mask voxels: " << mask.count() << "\n";
  return kExitOk;
}

// ---- eval -------------------------------------------------------------------

int run_eval(const std::string& gt, const std::string& pred, const std::string& flow_gt,
             const std::string& flow_pred, const std::string& bundle_path,
             std::vector<double> thresholds, std::vector<int> foreground,
             const std::string& out_path, int threads, bool pool_rays) {
  const OccupancyGrid g = load_occupancy(gt);
  const OccupancyGrid p = load_occupancy(pred);
  const FlowField fg = load_flow(flow_gt);
  const FlowField fp = load_flow(flow_pred);
  const RayBundle bundle = bundle_from_json(read_text(bundle_path));

  const MetricReport report = evaluate_all(
      g, p, fg, fp, bundle, thresholds, std::set<int>(foreground.begin(), foreground.end()),
      threads, pool_rays ? MavePooling::kRayPool : MavePooling::kClassMean);
  const std::string text = report.to_json();
  std::cout << text << "\n";
  if (!out_path.empty()) write_text(out_path, text);
  return kExitOk;
}

// ---- bins -------------------------------------------------------------------

json bins_for_axis(const json& axis, const BinConfig& cfg) {
  const auto scene_logits = axis.at("scene_logits").get<std::vector<double>>();
  const Eigen::VectorXd logits =
      Eigen::Map<const Eigen::VectorXd>(scene_logits.data(), scene_logits.size());
  const Eigen::VectorXd centers = bin_centers(softmax(logits), cfg);

  json out;
  out["centers"] = std::vector<double>(centers.data(), centers.data() + centers.size());
  if (axis.contains("voxel_logits")) {
    std::vector<double> flows;
    for (const auto& row : axis.at("voxel_logits")) {
      const auto v = row.get<std::vector<double>>();
      const Eigen::VectorXd w =
          softmax(Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()));
      flows.push_back(aggregate_flow(centers, w));
    }
    out["flows"] = flows;
  }
  return out;
}

bool check_grad_on(const Eigen::VectorXd& logits, const BinConfig& cfg) {
  const Eigen::VectorXd weights =
      Eigen::VectorXd::Constant(logits.size(), 1.0 / logits.size());
  const auto f_of = [&](const Eigen::VectorXd& l) {
    return aggregate_flow(bin_centers(softmax(l), cfg), weights);
  };
  const Eigen::VectorXd b = softmax(logits);
  const Eigen::VectorXd df_db =
      grad_bin_centers(b, cfg).transpose() * grad_aggregate(bin_centers(b, cfg), weights).first;
  const Eigen::VectorXd analytic = grad_through_softmax(logits, df_db);
  const double h = 1e-6;
  Eigen::VectorXd fd(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    Eigen::VectorXd lp = logits, lm = logits;
    lp[i] += h;
    lm[i] -= h;
    fd[i] = (f_of(lp) - f_of(lm)) / (2 * h);
  }
  const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-12);
  return (analytic - fd).cwiseAbs().maxCoeff() / scale <= 1e-6;
}

int run_bins(const std::string& input, int n_bins, double fmin, double fmax,
             bool check_grad, const std::string& out_path) {
  BinConfig cfg{n_bins, fmin, fmax};
  json in;

  // Accept a feat container (channel vectors as per-voxel logits) or JSON.
  bool is_container = false;
  {
    std::ifstream probe(input, std::ios::binary);
    char magic[4] = {};
    probe.read(magic, 4);
    is_container = probe && std::string(magic, 4) == "OCCV";
  }
  if (is_container) {
    const FeatureGrid feat = load_features(input);
    json axis;
    std::vector<double> scene(feat.channels, 0.0);
    json rows = json::array();
    for (std::size_t v = 0; v < feat.spec.num_voxels(); ++v) {
      std::vector<double> row(feat.at(v), feat.at(v) + feat.channels);
      for (int c = 0; c < feat.channels; ++c) scene[c] += row[c];
      rows.push_back(row);
    }
    for (auto& s : scene) s /= static_cast<double>(feat.spec.num_voxels());
    axis["scene_logits"] = scene;
    axis["voxel_logits"] = rows;
    in["f"] = axis;
    cfg.n_bins = feat.channels;
  } else {
    const json raw = json::parse(read_text(input));
    if (raw.contains("scene_logits")) {
      in["f"] = raw;
    } else {
      in = raw;  // per-axis objects, e.g. {"x": {...}, "y": {...}}
    }
  }

  json out;
  bool grads_ok = true;
  for (const auto& [axis_name, axis] : in.items()) {
    const auto logits_v = axis.at("scene_logits").get<std::vector<double>>();
    if (static_cast<int>(logits_v.size()) != cfg.n_bins) {
      cfg.n_bins = static_cast<int>(logits_v.size());
    }
    out[axis_name] = bins_for_axis(axis, cfg);
    if (check_grad) {
      grads_ok = grads_ok &&
                 check_grad_on(Eigen::Map<const Eigen::VectorXd>(logits_v.data(),
                                                                 logits_v.size()),
                               cfg);
    }
  }
  if (check_grad) {
    out["grad_check"] = grads_ok ? "pass" : "fail";
    if (!grads_ok) {
      std::cerr << "gradient check failed\n";
      return kExitData;
    }
  }
  const std::string text = out.dump(2);
  std::cout << text << "\n";
  if (!out_path.empty()) write_text(out_path, text);
  return kExitOk;
}

// ---- warp -------------------------------------------------------------------

int run_warp(const std::string& features, const std::string& flow_path, double dt,
             const std::string& out_path, int threads) {
  const FeatureGrid f = load_features(features);
  const FlowField flow = load_flow(flow_path);
  save_container(out_path, warp_forward(f, flow, dt, threads));
  return kExitOk;
}

int run_warp_occ(const std::string& gt, const std::string& flow_path, double dt,
                 const std::string& out_path, const std::string& gt_future,
                 const std::string& mask_path, int threads) {
  const OccupancyGrid g = load_occupancy(gt);
  const FlowField flow = load_flow(flow_path);
  const FeatureGrid soft = warp_occupancy(g, flow, dt, threads);
  if (!out_path.empty()) save_container(out_path, soft);
  if (!gt_future.empty()) {
    const OccupancyGrid future = load_occupancy(gt_future);
    if (!mask_path.empty()) {
      const VoxelMask mask = load_mask(mask_path);
      std::cout << "warp_score " << warp_score(soft, future, 1e-6, &mask) << "\n";
    } else {
      std::cout << "warp_score " << warp_score(soft, future) << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"occupancy/flow toolkit: masks, metrics, bins, warping"};
  app.require_subcommand(1);
  app.fallthrough();  // accept --config/--threads after the subcommand name too

  std::string config_path;
  int threads = 0;  // 0 = all cores
  app.add_option("--config", config_path, "JSON config file (flags take precedence)");
  auto* threads_opt =
      app.add_option("--threads", threads, "worker threads (0 = all cores)");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a deterministic synthetic scene");
  std::uint64_t seed = 0;
  std::string out_dir = "scene";
  auto* seed_opt = synth->add_option("--seed", seed, "RNG seed");
  synth->add_option("--out", out_dir, "output directory")->required();

  // gen-mask
  auto* gen_mask = app.add_subcommand("gen-mask", "ray visible mask (V1, or V2 with --dilate)");
  std::string gt_path, bundle_path, pattern_path, out_path;
  double dilate = 2.0;
  gen_mask->add_option("--gt", gt_path, "occupancy container")->required();
  gen_mask->add_option("--bundle", bundle_path, "ray bundle JSON")->required();
  gen_mask->add_option("--pattern", pattern_path, "pattern JSON overriding the bundle's");
  auto* dilate_opt =
      gen_mask->add_option("--dilate", dilate, "V2 dilation radius in meters");
  gen_mask->add_option("--out", out_path, "output mask container")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "RayIoU / mAVE / Occ Score report");
  std::string pred_path, flow_gt_path, flow_pred_path, report_path;
  std::vector<double> thresholds{1.0, 2.0, 4.0};
  std::vector<int> foreground{2, 3, 4, 9};
  bool pool_rays = false;
  eval->add_option("--gt", gt_path)->required();
  eval->add_option("--pred", pred_path)->required();
  eval->add_option("--flow-gt", flow_gt_path)->required();
  eval->add_option("--flow-pred", flow_pred_path)->required();
  eval->add_option("--bundle", bundle_path)->required();
  auto* thr_opt = eval->add_option("--thresholds", thresholds, "depth thresholds in meters")
                      ->delimiter(',');
  auto* fg_opt = eval->add_option("--foreground", foreground, "foreground class ids")
                     ->delimiter(',');
  eval->add_flag("--pool-rays", pool_rays, "pool mAVE over rays instead of classes");
  eval->add_option("--out", report_path, "also write the JSON report here");

  // bins
  auto* bins = app.add_subcommand("bins", "adaptive-bin centers and aggregated flows");
  std::string bins_input;
  int n_bins = 32;
  double fmin = -25.0, fmax = 25.0;
  bool check_grad = false;
  bins->add_option("input", bins_input, "logits JSON or feat container")->required();
  bins->add_option("--n-bins", n_bins, "bin count");
  bins->add_option("--fmin", fmin, "flow range minimum (m/s)");
  bins->add_option("--fmax", fmax, "flow range maximum (m/s)");
  bins->add_flag("--check-grad", check_grad, "verify analytic gradients vs finite differences");
  bins->add_option("--out", out_path, "write the JSON result here");

  // warp
  auto* warp = app.add_subcommand("warp", "forward-warp a feature grid by a flow field");
  std::string features_path, flow_path;
  double dt = 0.5;
  warp->add_option("--features", features_path)->required();
  warp->add_option("--flow", flow_path)->required();
  auto* dt_opt = warp->add_option("--dt", dt, "frame interval in seconds");
  warp->add_option("--out", out_path)->required();

  // warp-occ
  auto* warp_occ =
      app.add_subcommand("warp-occ", "warp occupancy to soft per-class mass, score vs future");
  std::string gt_future_path, mask_path;
  warp_occ->add_option("--gt", gt_path)->required();
  warp_occ->add_option("--flow", flow_path)->required();
  auto* dt_opt2 = warp_occ->add_option("--dt", dt, "frame interval in seconds");
  warp_occ->add_option("--out", out_path, "soft-occupancy feat container");
  warp_occ->add_option("--gt-future", gt_future_path, "future occupancy for warp_score");
  warp_occ->add_option("--mask", mask_path, "restrict warp_score to a voxel mask");

  // selftest
  app.add_subcommand("selftest", "run the built-in oracle suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    ConfigFile cfg;
    cfg.load(config_path);
    threads = resolve_threads_flag(threads_opt, threads, cfg);

    if (synth->parsed()) return run_synth(seed, config_path, out_dir, seed_opt);
    if (gen_mask->parsed()) {
      bool dilate_given = dilate_opt->count() > 0;
      if (!dilate_given && cfg.data.contains("dilate")) {
        dilate = cfg.data["dilate"].get<double>();
        dilate_given = true;
      }
      return run_gen_mask(gt_path, bundle_path, pattern_path, dilate, dilate_given,
                          out_path, threads);
    }
    if (eval->parsed()) {
      cfg.apply(thr_opt, "thresholds", thresholds);
      cfg.apply(fg_opt, "foreground", foreground);
      return run_eval(gt_path, pred_path, flow_gt_path, flow_pred_path, bundle_path,
                      thresholds, foreground, report_path, threads, pool_rays);
    }
    if (bins->parsed()) return run_bins(bins_input, n_bins, fmin, fmax, check_grad, out_path);
    if (warp->parsed()) {
      cfg.apply(dt_opt, "dt", dt);
      return run_warp(features_path, flow_path, dt, out_path, threads);
    }
    if (warp_occ->parsed()) {
      cfg.apply(dt_opt2, "dt", dt);
      return run_warp_occ(gt_path, flow_path, dt, out_path, gt_future_path, mask_path,
                          threads);
    }
    return occkit::tools::run_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
