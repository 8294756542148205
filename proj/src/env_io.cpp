#include <fstream>

#include <json.hpp>

#include "nav/env.hpp"

namespace nav {

using nlohmann::json;

namespace {
constexpr int kEnvFormatVersion = 1;
}

void save_split(const EnvSplit& split, const std::string& split_name, const std::string& path) {
  json j;
  j["format_version"] = kEnvFormatVersion;
  j["kind"] = "env_split";
  j["split"] = split_name;
  json houses = json::array();
  for (const auto& h : split.houses) {
    json nodes = json::array();
    for (const auto& n : h.nodes)
      nodes.push_back({{"id", n.id}, {"x", n.location.x}, {"y", n.location.y}, {"landmark", n.landmark}});
    json edges = json::array();
    for (auto [a, b] : h.edges) edges.push_back({a, b});
    houses.push_back({{"id", h.id}, {"seed", h.seed}, {"nodes", nodes}, {"edges", edges}});
  }
  j["houses"] = houses;
  json eps = json::array();
  for (const auto& ep : split.episodes) {
    eps.push_back({{"id", ep.id},
                   {"house_id", ep.house_id},
                   {"start", ep.start},
                   {"goal", ep.goal},
                   {"gt_path", ep.gt_path},
                   {"gt_length", ep.gt_length},
                   {"instruction", ep.instruction},
                   {"instruction_text", ep.instruction_text}});
  }
  j["episodes"] = eps;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write split file: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("short write: " + path);
}

EnvSplit load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open split file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw IoError("split file " + path + " is not valid JSON: " + ex.what());
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != kEnvFormatVersion)
    throw IoError("split file " + path + " has an unsupported format version");
  EnvSplit split;
  for (const auto& hj : j.at("houses")) {
    HouseGraph h;
    h.id = hj.at("id").get<int>();
    h.seed = hj.at("seed").get<std::uint64_t>();
    for (const auto& nj : hj.at("nodes"))
      h.nodes.push_back({nj.at("id").get<int>(),
                         {nj.at("x").get<double>(), nj.at("y").get<double>()},
                         nj.at("landmark").get<int>()});
    for (const auto& ej : hj.at("edges"))
      h.edges.emplace_back(ej.at(0).get<int>(), ej.at(1).get<int>());
    h.build_adjacency();
    split.houses.push_back(std::move(h));
  }
  for (const auto& ej : j.at("episodes")) {
    Episode ep;
    ep.id = ej.at("id").get<int>();
    ep.house_id = ej.at("house_id").get<int>();
    ep.start = ej.at("start").get<int>();
    ep.goal = ej.at("goal").get<int>();
    ep.gt_path = ej.at("gt_path").get<std::vector<int>>();
    ep.gt_length = ej.at("gt_length").get<double>();
    ep.instruction = ej.at("instruction").get<std::vector<int>>();
    ep.instruction_text = ej.at("instruction_text").get<std::string>();
    split.episodes.push_back(std::move(ep));
  }
  split.bind();
  return split;
}

}  // namespace nav
