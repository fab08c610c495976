#pragma once

#include <cstdint>
#include <vector>

#include "ddm/engine.hpp"
#include "ddm/grid.hpp"
#include "ddm/heuristics.hpp"
#include "ddm/rng.hpp"

namespace ddm {

// ---- dynamic problem driver -------------------------------------------------
//
// Robots never retire. The step a robot reaches its goal counts as an arrival,
// a fresh goal is drawn uniformly from the free vertices nobody is currently
// assigned, and the robot is re-routed that same step. The run ends the step
// the arrival count reaches total_goals; robots mid-route are abandoned.

struct ArrivalEvent {
  int robot = 0;
  int step = 0;
};

struct ThroughputRecord {
  int total_arrivals = 0;
  int elapsed_steps = 0;
  double throughput = 0.0;  // arrivals per step

  bool operator==(const ThroughputRecord&) const = default;
};

struct DmpResult {
  ThroughputRecord record;
  std::vector<ArrivalEvent> arrivals;  // in counting order
  std::vector<Configuration> trace;    // start config only unless history is on
  std::uint64_t seed = 0;
};

inline DmpResult run_dmp(const GridGraph& g, int n_robots, const HeuristicSpec& h,
                         const DatabaseSet& dbs, int total_goals, std::uint64_t seed,
                         EngineOptions opt = {}) {
  if (n_robots < 1) fail(ErrorCode::InvalidParameter, "need at least one robot");
  if (g.num_vertices() - n_robots < n_robots)
    fail(ErrorCode::Capacity,
         "fresh goals need at least as many spare free vertices as robots");
  if (total_goals < n_robots)
    fail(ErrorCode::InvalidParameter, "total_goals must cover every robot's first goal");

  Scenario sc = random_scenario(g, n_robots, seed);
  Engine engine(sc, h, dbs, opt);
  Rng goal_rng(mix_seed(seed, 0x676f616c));
  const std::vector<Vertex> verts = g.vertices();
  std::vector<char> is_goal(static_cast<std::size_t>(g.cell_count()), 0);
  for (const Vertex& v : engine.goals()) is_goal[g.index(v)] = 1;

  DmpResult out;
  out.seed = seed;
  int count = 0;
  // Rejection sampling over the free vertices; the capacity check above keeps
  // the acceptance rate at 1/2 or better. The retiring goal is still marked
  // while we draw, so the replacement never equals the robot's position.
  auto retarget = [&](int r) {
    Vertex next;
    do {
      next = verts[goal_rng.below(verts.size())];
    } while (is_goal[g.index(next)]);
    const Vertex old = engine.goals()[r];
    engine.set_goal(r, next);
    is_goal[g.index(old)] = 0;
    is_goal[g.index(next)] = 1;
  };
  // Simultaneous arrivals on the final step are all counted and logged, so
  // total_arrivals can exceed total_goals by the last batch's overshoot.
  auto absorb = [&](const std::vector<int>& arrived) {
    for (int r : arrived) {
      ++count;
      out.arrivals.push_back({r, engine.clock()});
      if (count < total_goals) retarget(r);
    }
  };

  std::vector<int> at_start;
  for (int r = 0; r < n_robots; ++r)
    if (engine.at_goal(r)) at_start.push_back(r);
  absorb(at_start);
  while (count < total_goals) absorb(engine.step());

  out.record.total_arrivals = count;
  out.record.elapsed_steps = engine.clock();
  out.record.throughput =
      engine.clock() > 0 ? static_cast<double>(count) / engine.clock() : 0.0;
  out.trace = engine.history();
  return out;
}

}  // namespace ddm
