#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ddm/bench.hpp"

namespace {

// Shared map-source flags; exactly one source must be chosen.
struct MapFlags {
  std::string file;
  std::string free_dims;
  bool warehouse = false;
  std::string lowres;

  void attach(CLI::App* cmd) {
    auto* grp = cmd->add_option_group("map source")->require_option(1);
    grp->add_option("--map", file, "map file to load");
    grp->add_option("--free", free_dims, "obstacle-free grid, e.g. 24x18");
    grp->add_flag("--warehouse", warehouse, "69x36 warehouse layout");
    grp->add_option("--lowres", lowres,
                    "random low-resolution map as WxH:K:PCT, e.g. 30x30:2:10");
  }

  ddm::MapSource source() const {
    ddm::MapSource m;
    if (!file.empty()) {
      m.kind = ddm::MapSource::Kind::File;
      m.path = file;
    } else if (!free_dims.empty()) {
      m.kind = ddm::MapSource::Kind::Free;
      parse_dims(free_dims, m.width, m.height);
    } else if (warehouse) {
      m.kind = ddm::MapSource::Kind::Warehouse;
    } else {
      m.kind = ddm::MapSource::Kind::LowRes;
      std::size_t c1 = lowres.find(':');
      std::size_t c2 = lowres.find(':', c1 + 1);
      if (c1 == std::string::npos || c2 == std::string::npos)
        ddm::fail(ddm::ErrorCode::Parse, "--lowres wants WxH:K:PCT, got " + lowres);
      parse_dims(lowres.substr(0, c1), m.base_w, m.base_h);
      m.k = std::stoi(lowres.substr(c1 + 1, c2 - c1 - 1));
      m.obstacle_fraction = std::stod(lowres.substr(c2 + 1)) / 100.0;
    }
    return m;
  }

 private:
  static void parse_dims(const std::string& text, int& w, int& h) {
    std::size_t x = text.find('x');
    if (x == std::string::npos)
      ddm::fail(ddm::ErrorCode::Parse, "expected WxH, got " + text);
    w = std::stoi(text.substr(0, x));
    h = std::stoi(text.substr(x + 1));
  }
};

// Databases come from --db/--db3, then the DDM_DB_PATH/DDM_DB3_PATH
// environment, and are built in memory as a last resort (full 2x3; a small
// 3x3 core with the lazy fallback covering the rest).
struct DbFlags {
  std::string path_2x3;
  std::string path_3x3;

  void attach(CLI::App* cmd) {
    cmd->add_option("--db", path_2x3, "2x3 database file (env DDM_DB_PATH)");
    cmd->add_option("--db3", path_3x3, "3x3 database file (env DDM_DB3_PATH)");
  }

  ddm::DatabaseSet resolve(bool need_3x3) {
    db2_ = open(ddm::SmallShape::S2x3, path_2x3, "DDM_DB_PATH");
    if (need_3x3) db3_ = open(ddm::SmallShape::S3x3, path_3x3, "DDM_DB3_PATH");
    return {&*db2_, db3_ ? &*db3_ : nullptr};
  }

 private:
  static ddm::SolutionDatabase open(ddm::SmallShape shape, std::string path,
                                    const char* env) {
    if (path.empty())
      if (const char* e = std::getenv(env)) path = e;
    if (!path.empty()) {
      ddm::SolutionDatabase db = ddm::SolutionDatabase::load(path);
      if (db.shape() != shape)
        ddm::fail(ddm::ErrorCode::InvalidParameter, path + " holds the wrong shape");
      return db;
    }
    ddm::BuildOptions options;
    if (shape == ddm::SmallShape::S3x3) options.n_max = 2;
    return ddm::SolutionDatabase::build(shape, options);
  }

  std::optional<ddm::SolutionDatabase> db2_;
  std::optional<ddm::SolutionDatabase> db3_;
};

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path);
  if (!out) ddm::fail(ddm::ErrorCode::Parse, "cannot write " + out_path);
  out << text;
}

std::string stats_csv(const ddm::SolveStats& s) {
  std::ostringstream out;
  out << "makespan,lower_bound,ratio,wall_ms,conflicts,windows,postpones,skips,seed\n"
      << s.makespan << ',' << s.lower_bound << ',' << s.ratio << ',' << s.wall_ms << ','
      << s.conflicts << ',' << s.windows << ',' << s.postpones << ',' << s.skips << ','
      << s.seed << '\n';
  return out.str();
}

std::string throughput_csv(const ddm::DmpResult& r) {
  std::ostringstream out;
  out << "total_arrivals,elapsed_steps,throughput,seed\n"
      << r.record.total_arrivals << ',' << r.record.elapsed_steps << ','
      << r.record.throughput << ',' << r.seed << '\n';
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DDM grid path planning"};
  app.require_subcommand(1);

  MapFlags solve_map, bench_map, dmp_map, heat_map;
  DbFlags solve_db, bench_db, dmp_db;
  std::string scenario_path, heuristic = "random", shape = "2x3", format = "json";
  std::string out_path, trace_path;
  std::uint64_t seed = 0;
  int robots = 2;

  CLI::App* solve = app.add_subcommand("solve", "route one scenario");
  solve_map.attach(solve);
  solve_db.attach(solve);
  solve->add_option("--scenario", scenario_path, "scenario file (else random)");
  solve->add_option("--robots", robots, "robot count for random scenarios");
  solve->add_option("--heuristic", heuristic, "initial-path heuristic");
  solve->add_option("--shape", shape, "window shapes: 2x3 or 3x3");
  solve->add_option("--seed", seed, "random seed");
  solve->add_option("--out", out_path, "stats file (default stdout)");
  solve->add_option("--trace", trace_path, "also write the trajectory here");
  solve->add_option("--format", format, "stats format: json or csv")
      ->check(CLI::IsMember({"json", "csv"}));

  std::vector<int> bench_robots{10, 20, 30};
  std::vector<std::string> bench_heuristics{"random"};
  std::vector<std::string> bench_shapes{"2x3"};
  std::string bench_mode = "one-shot", bench_out, bench_format = "csv";
  std::uint64_t bench_seed = 0;
  int trials = 30, goals = 1000, threads = 1;

  CLI::App* bench = app.add_subcommand("bench", "run an experiment matrix");
  bench_map.attach(bench);
  bench_db.attach(bench);
  bench->add_option("--robots", bench_robots, "robot counts")->delimiter(',');
  bench->add_option("--heuristics", bench_heuristics, "heuristics")->delimiter(',');
  bench->add_option("--shapes", bench_shapes, "window shapes")->delimiter(',');
  bench->add_option("--trials", trials, "trials per cell");
  bench->add_option("--mode", bench_mode, "one-shot or dmp")
      ->check(CLI::IsMember({"one-shot", "dmp"}));
  bench->add_option("--goals", goals, "total goals per dmp trial");
  bench->add_option("--threads", threads, "worker pool size");
  bench->add_option("--seed", bench_seed, "seed base");
  bench->add_option("--out", bench_out, "results file (default stdout)");
  bench->add_option("--format", bench_format, "csv or json")
      ->check(CLI::IsMember({"json", "csv"}));

  std::string dmp_heuristic = "random", dmp_shape = "2x3", dmp_format = "json";
  std::string dmp_out, dmp_trace;
  std::uint64_t dmp_seed = 0;
  int dmp_robots = 10, dmp_goals = 1000;

  CLI::App* dmp = app.add_subcommand("dmp", "stream goals and measure throughput");
  dmp_map.attach(dmp);
  dmp_db.attach(dmp);
  dmp->add_option("--robots", dmp_robots, "robot count");
  dmp->add_option("--goals", dmp_goals, "total goal arrivals");
  dmp->add_option("--heuristic", dmp_heuristic, "initial-path heuristic");
  dmp->add_option("--shape", dmp_shape, "window shapes: 2x3 or 3x3");
  dmp->add_option("--seed", dmp_seed, "random seed");
  dmp->add_option("--out", dmp_out, "stats file (default stdout)");
  dmp->add_option("--trace", dmp_trace, "also write the trajectory here");
  dmp->add_option("--format", dmp_format, "stats format: json or csv")
      ->check(CLI::IsMember({"json", "csv"}));

  std::string heat_heuristic = "random", heat_out, heat_format = "csv";
  std::uint64_t heat_seed = 0;
  long pairs = 100000;

  CLI::App* heat = app.add_subcommand("heatmap", "vertex traversal counts");
  heat_map.attach(heat);
  heat->add_option("--pairs", pairs, "start/goal pairs to sample");
  heat->add_option("--heuristic", heat_heuristic, "path heuristic");
  heat->add_option("--seed", heat_seed, "random seed");
  heat->add_option("--out", heat_out, "matrix file (default stdout)");
  heat->add_option("--format", heat_format, "csv or json")
      ->check(CLI::IsMember({"json", "csv"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) {
      ddm::GridGraph g = ddm::realize_map(solve_map.source(), seed);
      ddm::Scenario sc = scenario_path.empty()
                             ? ddm::random_scenario(g, robots, seed)
                             : ddm::load_scenario(g, scenario_path);
      ddm::EngineOptions opt;
      opt.window_mode = ddm::parse_window_mode(shape);
      ddm::DatabaseSet dbs =
          solve_db.resolve(opt.window_mode == ddm::WindowMode::Prefer3x3);
      ddm::SolveResult res = ddm::solve(sc, ddm::parse_heuristic(heuristic), dbs, opt);
      if (!trace_path.empty()) ddm::save_trace(res.trace, trace_path);
      if (format == "csv") {
        emit(stats_csv(res.stats), out_path);
      } else {
        std::ostringstream js;
        ddm::write_stats_json(res.stats, js);
        emit(js.str(), out_path);
      }
    } else if (bench->parsed()) {
      ddm::ExperimentSpec spec;
      spec.map = bench_map.source();
      spec.robot_counts = bench_robots;
      for (const std::string& h : bench_heuristics)
        spec.heuristics.push_back(ddm::parse_heuristic(h));
      spec.modes.clear();
      for (const std::string& s : bench_shapes)
        spec.modes.push_back(ddm::parse_window_mode(s));
      spec.trials = trials;
      spec.seed_base = bench_seed;
      spec.mode = bench_mode == "dmp" ? ddm::RunMode::Dmp : ddm::RunMode::OneShot;
      spec.total_goals = goals;
      spec.threads = threads;
      bool need_3x3 = false;
      for (ddm::WindowMode m : spec.modes)
        if (m == ddm::WindowMode::Prefer3x3) need_3x3 = true;
      std::vector<ddm::ResultRow> rows =
          ddm::run_experiment(spec, bench_db.resolve(need_3x3));
      std::ostringstream out;
      if (bench_format == "csv")
        ddm::write_results_csv(rows, out);
      else
        ddm::write_results_json(rows, out);
      emit(out.str(), bench_out);
    } else if (dmp->parsed()) {
      ddm::GridGraph g = ddm::realize_map(dmp_map.source(), dmp_seed);
      ddm::EngineOptions opt;
      opt.window_mode = ddm::parse_window_mode(dmp_shape);
      ddm::DatabaseSet dbs =
          dmp_db.resolve(opt.window_mode == ddm::WindowMode::Prefer3x3);
      ddm::DmpResult res = ddm::run_dmp(g, dmp_robots, ddm::parse_heuristic(dmp_heuristic),
                                        dbs, dmp_goals, dmp_seed, opt);
      if (!dmp_trace.empty()) ddm::save_trace(res.trace, dmp_trace);
      if (dmp_format == "csv") {
        emit(throughput_csv(res), dmp_out);
      } else {
        std::ostringstream js;
        ddm::write_throughput_json(res, js);
        emit(js.str(), dmp_out);
      }
    } else if (heat->parsed()) {
      ddm::GridGraph g = ddm::realize_map(heat_map.source(), heat_seed);
      ddm::Heatmap hm =
          ddm::occupancy_heatmap(g, pairs, ddm::parse_heuristic(heat_heuristic), heat_seed);
      std::ostringstream out;
      if (heat_format == "csv") {
        ddm::write_heatmap_csv(hm, out);
      } else {
        nlohmann::json doc;
        doc["width"] = hm.width;
        doc["height"] = hm.height;
        nlohmann::json rows = nlohmann::json::array();
        for (int j = 1; j <= hm.height; ++j) {
          nlohmann::json row = nlohmann::json::array();
          for (int i = 1; i <= hm.width; ++i) row.push_back(hm.at(i, j));
          rows.push_back(std::move(row));
        }
        doc["counts"] = std::move(rows);
        out << doc.dump(2) << '\n';
      }
      emit(out.str(), heat_out);
    }
  } catch (const ddm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
