#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ddm/dmp.hpp"
#include "ddm/engine.hpp"
#include "ddm/grid.hpp"
#include "ddm/heuristics.hpp"
#include "ddm/rng.hpp"
#include "ddm/validate.hpp"

namespace ddm {

// ---- experiment matrix ------------------------------------------------------

struct MapSource {
  enum class Kind { Free, Warehouse, LowRes, File };
  Kind kind = Kind::Free;
  int width = 24, height = 18;  // Free
  int rows = 8, cols = 8, block_w = 5, block_h = 2, aisle_x = 3, aisle_y = 2;  // Warehouse
  int base_w = 30, base_h = 30, k = 2;  // LowRes: base cells, scaled k-fold
  double obstacle_fraction = 0.10;      // LowRes
  std::string path;                     // File

  std::string label() const {
    switch (kind) {
      case Kind::Free:
        return "free-" + std::to_string(width) + "x" + std::to_string(height);
      case Kind::Warehouse:
        return "warehouse-" + std::to_string(rows) + "x" + std::to_string(cols);
      case Kind::LowRes:
        return "lowres-" + std::to_string(base_w) + "x" + std::to_string(base_h) + "-k" +
               std::to_string(k) + "-p" + std::to_string(static_cast<int>(
                   obstacle_fraction * 100.0 + 0.5));
      case Kind::File:
        return "file:" + path;
    }
    return "?";
  }
};

// LowRes maps are drawn per trial from the trial seed; the other sources are
// fixed and ignore it.
inline GridGraph realize_map(const MapSource& m, std::uint64_t seed) {
  switch (m.kind) {
    case MapSource::Kind::Free:
      return GridGraph(m.width, m.height);
    case MapSource::Kind::Warehouse:
      return generate_warehouse(m.rows, m.cols, m.block_w, m.block_h, m.aisle_x, m.aisle_y);
    case MapSource::Kind::LowRes:
      return random_low_res_map(m.base_w, m.base_h, m.k, m.obstacle_fraction,
                                mix_seed(seed, 0x6d6170));
    case MapSource::Kind::File:
      return load_map(m.path);
  }
  fail(ErrorCode::InvalidParameter, "unknown map source");
}

enum class RunMode { OneShot, Dmp };

inline const char* run_mode_name(RunMode m) {
  return m == RunMode::OneShot ? "one-shot" : "dmp";
}

struct ExperimentSpec {
  MapSource map;
  std::vector<int> robot_counts;
  std::vector<HeuristicSpec> heuristics;
  std::vector<WindowMode> modes{WindowMode::Only2x3};
  int trials = 30;
  std::uint64_t seed_base = 0;
  RunMode mode = RunMode::OneShot;
  int total_goals = 1000;  // Dmp mode only
  int threads = 1;
};

// One experiment cell aggregated over its trials. Means and deviations cover
// successful trials only; stalled trials land in `failures` instead of being
// dropped on the floor. In Dmp mode `makespan` holds the elapsed step count
// and the optimality ratio does not apply.
struct ResultRow {
  std::string map_label;
  RunMode mode = RunMode::OneShot;
  HeuristicSpec heuristic;
  WindowMode window_mode = WindowMode::Only2x3;
  int robots = 0;
  int trials = 0;
  int failures = 0;
  double makespan_mean = 0.0, makespan_std = 0.0;
  double wall_ms_mean = 0.0, wall_ms_std = 0.0;
  double ratio_mean = 0.0;
};

namespace detail {

struct TrialOutcome {
  bool ok = false;
  bool stalled = false;
  double makespan = 0.0;
  double wall_ms = 0.0;
  double ratio = 0.0;
};

inline double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

// Cells are enumerated heuristic-major, then window mode, then robot count;
// trial seeds are mix_seed(seed_base, cell_index, trial_index) so any single
// trial can be reproduced in isolation. Trials run on a pool of
// spec.threads workers sharing the immutable databases; results are slotted
// by job index, so the output is identical at any worker count.
inline std::vector<ResultRow> run_experiment(const ExperimentSpec& spec,
                                             const DatabaseSet& dbs) {
  if (spec.trials < 1) fail(ErrorCode::InvalidParameter, "trials must be at least 1");
  if (spec.robot_counts.empty() || spec.heuristics.empty() || spec.modes.empty())
    fail(ErrorCode::InvalidParameter, "experiment matrix has an empty axis");
  if (spec.threads < 1) fail(ErrorCode::InvalidParameter, "threads must be at least 1");

  struct Cell {
    HeuristicSpec h;
    WindowMode mode;
    int robots;
  };
  std::vector<Cell> cells;
  for (const HeuristicSpec& h : spec.heuristics)
    for (WindowMode mode : spec.modes)
      for (int n : spec.robot_counts) cells.push_back({h, mode, n});

  const std::size_t jobs = cells.size() * static_cast<std::size_t>(spec.trials);
  std::vector<detail::TrialOutcome> outcomes(jobs);

  auto run_trial = [&](std::size_t job) {
    const std::size_t cell_idx = job / static_cast<std::size_t>(spec.trials);
    const int trial = static_cast<int>(job % static_cast<std::size_t>(spec.trials));
    const Cell& cell = cells[cell_idx];
    const std::uint64_t seed =
        mix_seed(spec.seed_base, static_cast<std::uint64_t>(cell_idx),
                 static_cast<std::uint64_t>(trial));
    GridGraph g = realize_map(spec.map, seed);
    EngineOptions opt;
    opt.window_mode = cell.mode;
    detail::TrialOutcome& out = outcomes[job];
    try {
      if (spec.mode == RunMode::OneShot) {
        Scenario sc = random_scenario(g, cell.robots, seed);
        SolveResult res = solve(sc, cell.h, dbs, opt);
        ReplayReport rep = check_trajectories(g, res.trace, sc.starts, sc.goals);
        if (!rep.ok)
          fail(ErrorCode::Validation,
               "trial " + std::to_string(trial) + " of cell " + std::to_string(cell_idx) +
                   " produced a bad trace: " + rep.message);
        out = {true, false, static_cast<double>(res.stats.makespan),
               static_cast<double>(res.stats.wall_ms), res.stats.ratio};
      } else {
        auto wall0 = std::chrono::steady_clock::now();
        DmpResult res = run_dmp(g, cell.robots, cell.h, dbs, spec.total_goals, seed, opt);
        auto wall1 = std::chrono::steady_clock::now();
        ReplayReport rep = check_trajectories(g, res.trace);
        if (!rep.ok)
          fail(ErrorCode::Validation,
               "trial " + std::to_string(trial) + " of cell " + std::to_string(cell_idx) +
                   " produced a bad trace: " + rep.message);
        double ms = static_cast<double>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                            wall1 - wall0)
                                            .count());
        out = {true, false, static_cast<double>(res.record.elapsed_steps), ms, 0.0};
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Stall) throw;
      out.stalled = true;
    }
  };

  if (spec.threads == 1) {
    for (std::size_t job = 0; job < jobs; ++job) run_trial(job);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(spec.threads));
    std::vector<std::thread> pool;
    for (int w = 0; w < spec.threads; ++w)
      pool.emplace_back([&, w] {
        try {
          for (;;) {
            std::size_t job = next.fetch_add(1);
            if (job >= jobs) return;
            run_trial(job);
          }
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<ResultRow> rows;
  rows.reserve(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    ResultRow row;
    row.map_label = spec.map.label();
    row.mode = spec.mode;
    row.heuristic = cells[c].h;
    row.window_mode = cells[c].mode;
    row.robots = cells[c].robots;
    row.trials = spec.trials;
    std::vector<double> makespans, walls, ratios;
    for (int t = 0; t < spec.trials; ++t) {
      const detail::TrialOutcome& out =
          outcomes[c * static_cast<std::size_t>(spec.trials) + t];
      if (!out.ok) {
        ++row.failures;
        continue;
      }
      makespans.push_back(out.makespan);
      walls.push_back(out.wall_ms);
      ratios.push_back(out.ratio);
    }
    row.makespan_mean = detail::mean_of(makespans);
    row.makespan_std = detail::sample_std(makespans, row.makespan_mean);
    row.wall_ms_mean = detail::mean_of(walls);
    row.wall_ms_std = detail::sample_std(walls, row.wall_ms_mean);
    row.ratio_mean = detail::mean_of(ratios);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---- result serialization ---------------------------------------------------

namespace detail {

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

}  // namespace detail

// Wall-time columns vary run to run; everything else is seed-determined.
inline void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << "# ddm-bench-results v1\n";
  out << "map,mode,heuristic,windows,robots,trials,failures,"
         "makespan_mean,makespan_std,wall_ms_mean,wall_ms_std,ratio_mean\n";
  for (const ResultRow& row : rows) {
    out << row.map_label << ',' << run_mode_name(row.mode) << ','
        << heuristic_name(row.heuristic) << ',' << window_mode_name(row.window_mode) << ','
        << row.robots << ',' << row.trials << ',' << row.failures << ','
        << detail::format_double(row.makespan_mean) << ','
        << detail::format_double(row.makespan_std) << ','
        << detail::format_double(row.wall_ms_mean) << ','
        << detail::format_double(row.wall_ms_std) << ',';
    if (row.mode == RunMode::OneShot) out << detail::format_double(row.ratio_mean);
    out << '\n';
  }
}

inline void write_results_json(const std::vector<ResultRow>& rows, std::ostream& out) {
  nlohmann::json doc;
  doc["format"] = "ddm-bench-results";
  doc["version"] = 1;
  nlohmann::json arr = nlohmann::json::array();
  for (const ResultRow& row : rows) {
    nlohmann::json r;
    r["map"] = row.map_label;
    r["mode"] = run_mode_name(row.mode);
    r["heuristic"] = heuristic_name(row.heuristic);
    r["windows"] = window_mode_name(row.window_mode);
    r["robots"] = row.robots;
    r["trials"] = row.trials;
    r["failures"] = row.failures;
    r["makespan_mean"] = row.makespan_mean;
    r["makespan_std"] = row.makespan_std;
    r["wall_ms_mean"] = row.wall_ms_mean;
    r["wall_ms_std"] = row.wall_ms_std;
    if (row.mode == RunMode::OneShot) r["ratio_mean"] = row.ratio_mean;
    arr.push_back(std::move(r));
  }
  doc["rows"] = std::move(arr);
  out << doc.dump(2) << '\n';
}

inline void write_stats_json(const SolveStats& stats, std::ostream& out) {
  nlohmann::json doc;
  doc["makespan"] = stats.makespan;
  doc["lower_bound"] = stats.lower_bound;
  doc["ratio"] = stats.ratio;
  doc["wall_ms"] = stats.wall_ms;
  doc["conflicts"] = stats.conflicts;
  doc["windows"] = stats.windows;
  doc["postpones"] = stats.postpones;
  doc["skips"] = stats.skips;
  doc["seed"] = stats.seed;
  out << doc.dump(2) << '\n';
}

inline void write_throughput_json(const DmpResult& res, std::ostream& out) {
  nlohmann::json doc;
  doc["total_arrivals"] = res.record.total_arrivals;
  doc["elapsed_steps"] = res.record.elapsed_steps;
  doc["throughput"] = res.record.throughput;
  doc["seed"] = res.seed;
  out << doc.dump(2) << '\n';
}

// ---- traversal heatmap ------------------------------------------------------

struct Heatmap {
  int width = 0, height = 0;
  std::vector<std::uint64_t> counts;       // row-major, j=1 first
  std::uint64_t path_cells = 0;            // sum over sampled paths of length+1

  std::uint64_t at(int i, int j) const {
    return counts[static_cast<std::size_t>(j - 1) * width + (i - 1)];
  }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (std::uint64_t c : counts) t += c;
    return t;
  }
};

// Samples start/goal pairs uniformly from the free vertices (a pair may
// coincide) and accumulates how often each vertex is traversed. Heuristics
// that need a penalty field accumulate it across the sampled paths, scaled
// the way the path generator scales it across robots.
inline Heatmap occupancy_heatmap(const GridGraph& g, long pairs, const HeuristicSpec& h,
                                 std::uint64_t seed) {
  if (pairs < 0) fail(ErrorCode::InvalidParameter, "pair count must be nonnegative");
  Heatmap hm;
  hm.width = g.width();
  hm.height = g.height();
  hm.counts.assign(static_cast<std::size_t>(g.cell_count()), 0);
  if (pairs == 0) return hm;
  const std::vector<Vertex> verts = g.vertices();
  if (verts.empty()) fail(ErrorCode::InvalidParameter, "map has no free vertices");
  Rng rng(seed);
  std::optional<OccupancyMap> occ;
  std::optional<StateTimeMap> st;
  if (h.kind == HeuristicKind::Occupancy) occ.emplace(g);
  if (h.kind == HeuristicKind::StateTime)
    st.emplace(g, 4l * (g.width() + g.height()));
  const std::uint64_t divisor = static_cast<std::uint64_t>(pairs);
  for (long p = 0; p < pairs; ++p) {
    const Vertex s = verts[rng.below(verts.size())];
    const Vertex t = verts[rng.below(verts.size())];
    Path path;
    try {
      switch (h.kind) {
        case HeuristicKind::Random:
          path = random_shortest_path(g, s, t, rng);
          break;
        case HeuristicKind::SingleTurnFar:
        case HeuristicKind::SingleTurnNear:
        case HeuristicKind::SingleTurnMixed:
          path = single_turn_path(g, s, t, h.kind, h.ratio, rng);
          break;
        case HeuristicKind::Occupancy:
          path = astar_path(g, s, t, h.kind, &*occ, nullptr, divisor);
          break;
        case HeuristicKind::StateTime:
          path = astar_path(g, s, t, h.kind, nullptr, &*st, divisor);
          break;
        default:
          path = astar_path(g, s, t, HeuristicKind::Manhattan);
          break;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotApplicable) throw;
      path = astar_path(g, s, t, HeuristicKind::Manhattan);
    }
    if (occ) occ->add_path(path);
    if (st) st->add_path(path, 0);
    for (const Vertex& v : path)
      ++hm.counts[static_cast<std::size_t>(g.index(v))];
    hm.path_cells += path.size();
  }
  return hm;
}

// Matrix of counts for external plotting, one text row per grid row, j=1 first
// to match the map file orientation.
inline void write_heatmap_csv(const Heatmap& hm, std::ostream& out) {
  out << "# ddm-heatmap v1\n";
  for (int j = 1; j <= hm.height; ++j) {
    for (int i = 1; i <= hm.width; ++i) {
      if (i > 1) out << ',';
      out << hm.at(i, j);
    }
    out << '\n';
  }
}

}  // namespace ddm
