#include "nav/viz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace nav {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

struct Frame {
  double min_x, min_y, max_y, scale, margin;
  double X(double x) const { return (x - min_x) * scale + margin; }
  double Y(double y) const { return (max_y - y) * scale + margin; }  // flip: SVG y grows down
};

void star(std::ostringstream& out, const Frame& f, Vec2 c, double r, const std::string& color) {
  out << "<polygon points=\"";
  for (int i = 0; i < 10; ++i) {
    const double ang = -M_PI / 2 + i * M_PI / 5;
    const double rr = (i % 2 == 0) ? r : 0.4 * r;
    out << fmt(f.X(c.x) + rr * std::cos(ang)) << "," << fmt(f.Y(c.y) + rr * std::sin(ang));
    if (i != 9) out << " ";
  }
  out << "\" fill=\"" << color << "\" stroke=\"black\" stroke-width=\"0.5\"/>\n";
}

std::string step_color(int step, int total) {
  // blue (early) to red (late)
  const double f = total <= 1 ? 1.0 : static_cast<double>(step) / total;
  const int r = static_cast<int>(std::lround(40 + 200 * f));
  const int b = static_cast<int>(std::lround(220 - 180 * f));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x50%02x", r, b);
  return buf;
}

}  // namespace

std::string render_trace_svg(const HouseGraph& house, const Episode& episode,
                             const EpisodeTrace& trace) {
  if (trace.episode_id != episode.id)
    throw DomainError("render_trace_svg: trace episode " + std::to_string(trace.episode_id) +
                      " does not match episode " + std::to_string(episode.id));
  double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
  auto grow = [&](Vec2 p) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  };
  for (const auto& n : house.nodes) grow(n.location);
  for (const auto& s : trace.steps)
    if (!s.target_dist.empty()) grow(s.target_argmax_center);

  const double scale = 24.0, margin = 24.0;
  Frame f{min_x, min_y, max_y, scale, margin};
  const double W = (max_x - min_x) * scale + 2 * margin;
  const double H = (max_y - min_y) * scale + 2 * margin;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(W) << "\" height=\""
      << fmt(H) << "\" viewBox=\"0 0 " << fmt(W) << " " << fmt(H) << "\">\n";
  out << "<defs><marker id=\"arrow\" markerWidth=\"8\" markerHeight=\"8\" refX=\"6\" refY=\"3\" "
         "orient=\"auto\"><path d=\"M0,0 L6,3 L0,6 z\" fill=\"#2060c0\"/></marker></defs>\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // navigability edges
  for (auto [a, b] : house.edges) {
    const Vec2 pa = house.nodes[static_cast<size_t>(a)].location;
    const Vec2 pb = house.nodes[static_cast<size_t>(b)].location;
    out << "<line x1=\"" << fmt(f.X(pa.x)) << "\" y1=\"" << fmt(f.Y(pa.y)) << "\" x2=\""
        << fmt(f.X(pb.x)) << "\" y2=\"" << fmt(f.Y(pb.y))
        << "\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n";
  }
  // ground-truth path
  for (size_t i = 0; i + 1 < episode.gt_path.size(); ++i) {
    const Vec2 pa = house.nodes[static_cast<size_t>(episode.gt_path[i])].location;
    const Vec2 pb = house.nodes[static_cast<size_t>(episode.gt_path[i + 1])].location;
    out << "<line x1=\"" << fmt(f.X(pa.x)) << "\" y1=\"" << fmt(f.Y(pa.y)) << "\" x2=\""
        << fmt(f.X(pb.x)) << "\" y2=\"" << fmt(f.Y(pb.y))
        << "\" stroke=\"#40a040\" stroke-width=\"3\" stroke-opacity=\"0.6\"/>\n";
  }
  // agent walk with arrows
  for (size_t i = 0; i + 1 < trace.visited.size(); ++i) {
    const Vec2 pa = house.nodes[static_cast<size_t>(trace.visited[i])].location;
    const Vec2 pb = house.nodes[static_cast<size_t>(trace.visited[i + 1])].location;
    out << "<line x1=\"" << fmt(f.X(pa.x)) << "\" y1=\"" << fmt(f.Y(pa.y)) << "\" x2=\""
        << fmt(f.X(pb.x)) << "\" y2=\"" << fmt(f.Y(pb.y))
        << "\" stroke=\"#2060c0\" stroke-width=\"1.5\" marker-end=\"url(#arrow)\"/>\n";
  }
  // nodes
  for (const auto& n : house.nodes)
    out << "<circle cx=\"" << fmt(f.X(n.location.x)) << "\" cy=\"" << fmt(f.Y(n.location.y))
        << "\" r=\"3\" fill=\"#888888\"/>\n";
  // per-step predicted targets
  int stars_total = 0;
  for (const auto& s : trace.steps)
    if (!s.target_dist.empty()) ++stars_total;
  int k = 0;
  for (const auto& s : trace.steps) {
    if (s.target_dist.empty()) continue;
    ++k;
    star(out, f, s.target_argmax_center, 7.0, step_color(k, stars_total));
  }
  // start and goal markers
  const Vec2 st = house.nodes[static_cast<size_t>(episode.start)].location;
  const Vec2 gl = house.nodes[static_cast<size_t>(episode.goal)].location;
  out << "<rect x=\"" << fmt(f.X(st.x) - 5) << "\" y=\"" << fmt(f.Y(st.y) - 5)
      << "\" width=\"10\" height=\"10\" fill=\"none\" stroke=\"#000000\" stroke-width=\"2\"/>\n";
  out << "<circle cx=\"" << fmt(f.X(gl.x)) << "\" cy=\"" << fmt(f.Y(gl.y))
      << "\" r=\"8\" fill=\"none\" stroke=\"#c03030\" stroke-width=\"2\"/>\n";
  out << "<circle cx=\"" << fmt(f.X(gl.x)) << "\" cy=\"" << fmt(f.Y(gl.y))
      << "\" r=\"4\" fill=\"#c03030\"/>\n";
  out << "</svg>\n";
  return out.str();
}

void write_trace_svg(const HouseGraph& house, const Episode& episode, const EpisodeTrace& trace,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write SVG: " + path);
  out << render_trace_svg(house, episode, trace);
}

void save_traces_jsonl(const std::vector<EpisodeTrace>& traces, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write traces: " + path);
  for (const auto& tr : traces) {
    for (const auto& s : tr.steps) {
      json j{{"episode_id", tr.episode_id},
             {"step", s.step},
             {"action_kind", s.action_kind},
             {"action_index", s.action_index},
             {"num_views", s.num_views},
             {"num_history", s.num_history},
             {"node", s.node},
             {"location", {s.location.x, s.location.y}},
             {"path_nodes", s.path_nodes},
             {"policy", s.policy},
             {"target_dist", s.target_dist},
             {"travelled", s.travelled},
             {"loss_il", s.loss_il},
             {"loss_ht", s.loss_ht},
             {"loss_t", s.loss_t},
             {"stop", s.stop},
             {"forced_stop", s.forced_stop}};
      if (!s.target_dist.empty()) {
        j["target_argmax_center"] = {s.target_argmax_center.x, s.target_argmax_center.y};
        j["dc"] = s.dc;
      }
      out << j.dump() << "\n";
    }
  }
}

std::vector<EpisodeTrace> load_traces_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open traces: " + path);
  std::vector<EpisodeTrace> traces;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& ex) {
      throw IoError("bad trace line: " + std::string(ex.what()));
    }
    const int eid = j.at("episode_id").get<int>();
    if (traces.empty() || traces.back().episode_id != eid) {
      traces.emplace_back();
      traces.back().episode_id = eid;
    }
    StepRecord s;
    s.step = j.at("step").get<int>();
    s.action_kind = j.at("action_kind").get<std::string>();
    s.action_index = j.at("action_index").get<int>();
    s.num_views = j.at("num_views").get<int>();
    s.num_history = j.at("num_history").get<int>();
    s.node = j.at("node").get<int>();
    s.location = {j.at("location")[0].get<double>(), j.at("location")[1].get<double>()};
    s.path_nodes = j.at("path_nodes").get<std::vector<int>>();
    s.policy = j.at("policy").get<std::vector<double>>();
    s.target_dist = j.at("target_dist").get<std::vector<double>>();
    s.travelled = j.at("travelled").get<double>();
    s.loss_il = j.at("loss_il").get<double>();
    s.loss_ht = j.at("loss_ht").get<double>();
    s.loss_t = j.at("loss_t").get<double>();
    s.stop = j.at("stop").get<bool>();
    s.forced_stop = j.at("forced_stop").get<bool>();
    if (j.contains("target_argmax_center")) {
      s.target_argmax_center = {j["target_argmax_center"][0].get<double>(),
                                j["target_argmax_center"][1].get<double>()};
      s.dc = j.at("dc").get<double>();
    }
    auto& tr = traces.back();
    tr.steps.push_back(std::move(s));
    const auto& stored = tr.steps.back();
    tr.stopped = stored.stop;
    if (tr.visited.empty())
      tr.visited.push_back(stored.path_nodes.empty() ? stored.node : stored.path_nodes.front());
    for (size_t i = 1; i < stored.path_nodes.size(); ++i)
      tr.visited.push_back(stored.path_nodes[i]);
  }
  return traces;
}

}  // namespace nav
