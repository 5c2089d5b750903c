#include <nlohmann/json.hpp>

#include "occkit/raycast.hpp"

namespace occkit {

std::string bundle_to_json(const RayBundle& bundle) {
  nlohmann::json j;
  j["origins"] = nlohmann::json::array();
  for (const auto& o : bundle.origins) {
    j["origins"].push_back({o.x(), o.y(), o.z()});
  }
  j["pattern"] = {{"elevations", bundle.pattern.elevations},
                  {"azimuth_count", bundle.pattern.azimuth_count},
                  {"max_range", bundle.pattern.max_range}};
  return j.dump(2);
}

RayBundle bundle_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  RayPattern pattern;
  pattern.elevations = j.at("pattern").at("elevations").get<std::vector<double>>();
  pattern.azimuth_count = j.at("pattern").at("azimuth_count").get<int>();
  pattern.max_range = j.at("pattern").at("max_range").get<double>();

  Trajectory traj;
  for (const auto& o : j.at("origins")) {
    traj.push_back(Pose{{o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()}, 0.0});
  }
  return generate_bundle(traj, pattern);
}

}  // namespace occkit
