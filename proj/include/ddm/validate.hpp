#pragma once

#include <cstdlib>
#include <string>
#include <unordered_map>
#include <vector>

#include "ddm/grid.hpp"

namespace ddm {

struct ReplayReport {
  bool ok = true;
  std::string message;
};

// Replays a trajectory against the movement and collision rules from scratch,
// independent of any engine bookkeeping: every configuration on free vertices,
// positions pairwise distinct, per-step moves wait-or-adjacent, no two robots
// swapping across one edge.
inline ReplayReport check_trajectories(const GridGraph& g,
                                       const std::vector<Configuration>& trace) {
  auto bad = [](std::string msg) { return ReplayReport{false, std::move(msg)}; };
  if (trace.empty()) return bad("trace has no timesteps");
  const std::size_t n = trace.front().size();
  if (n == 0) return bad("trace has no robots");
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const Configuration& config = trace[t];
    if (config.size() != n)
      return bad("robot count changes at step " + std::to_string(t));
    std::unordered_map<Vertex, std::size_t, VertexHash> where;
    for (std::size_t r = 0; r < n; ++r) {
      if (!g.has_vertex(config[r]))
        return bad("robot " + std::to_string(r) + " off the free grid at step " +
                   std::to_string(t) + ": " + to_string(config[r]));
      auto [it, fresh] = where.emplace(config[r], r);
      if (!fresh)
        return bad("robots " + std::to_string(it->second) + " and " + std::to_string(r) +
                   " share " + to_string(config[r]) + " at step " + std::to_string(t));
    }
  }
  for (std::size_t t = 1; t < trace.size(); ++t) {
    const Configuration& prev = trace[t - 1];
    const Configuration& cur = trace[t];
    std::unordered_map<Vertex, std::size_t, VertexHash> movers_from;
    for (std::size_t r = 0; r < n; ++r) {
      int span = std::abs(cur[r].i - prev[r].i) + std::abs(cur[r].j - prev[r].j);
      if (span > 1)
        return bad("robot " + std::to_string(r) + " jumps " + to_string(prev[r]) + " -> " +
                   to_string(cur[r]) + " at step " + std::to_string(t));
      if (span == 1) movers_from.emplace(prev[r], r);
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (cur[r] == prev[r]) continue;
      auto it = movers_from.find(cur[r]);
      if (it != movers_from.end() && it->second != r && cur[it->second] == prev[r])
        return bad("robots " + std::to_string(std::min(r, it->second)) + " and " +
                   std::to_string(std::max(r, it->second)) + " swap across " +
                   to_string(prev[r]) + " - " + to_string(cur[r]) + " at step " +
                   std::to_string(t));
    }
  }
  return {};
}

// Endpoint-checked variant for one-shot runs.
inline ReplayReport check_trajectories(const GridGraph& g,
                                       const std::vector<Configuration>& trace,
                                       const Configuration& starts,
                                       const Configuration& goals) {
  ReplayReport base = check_trajectories(g, trace);
  if (!base.ok) return base;
  if (trace.front() != starts) return {false, "trace does not begin at the starts"};
  if (trace.back() != goals) return {false, "trace does not end at the goals"};
  return {};
}

}  // namespace ddm
