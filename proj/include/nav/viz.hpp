#pragma once

#include <string>

#include "nav/env.hpp"

namespace nav {

// Deterministic SVG rendering of one episode: house edges, the ground-truth
// path, the agent's walk with direction arrows, one star per step at the
// predicted target center (color-graded by step), and start/goal markers.
// Throws DomainError when the trace does not belong to the episode.
std::string render_trace_svg(const HouseGraph& house, const Episode& episode,
                             const EpisodeTrace& trace);

void write_trace_svg(const HouseGraph& house, const Episode& episode, const EpisodeTrace& trace,
                     const std::string& path);

// One JSON object per step: action, location, full policy, full target
// distribution, argmax center, travelled distance.
void save_traces_jsonl(const std::vector<EpisodeTrace>& traces, const std::string& path);
std::vector<EpisodeTrace> load_traces_jsonl(const std::string& path);

}  // namespace nav
