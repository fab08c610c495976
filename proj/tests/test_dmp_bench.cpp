#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "ddm/bench.hpp"
#include "ddm/dmp.hpp"
#include "ddm/validate.hpp"
#include "helpers.hpp"

using ddm::Configuration;
using ddm::DmpResult;
using ddm::ExperimentSpec;
using ddm::HeuristicKind;
using ddm::HeuristicSpec;
using ddm::MapSource;
using ddm::ResultRow;
using ddm::RunMode;
using ddm::Vertex;
using ddm::WindowMode;

namespace {

const ddm::SolutionDatabase& db2x3() {
  static const ddm::SolutionDatabase db =
      ddm::SolutionDatabase::build(ddm::SmallShape::S2x3, {});
  return db;
}

ddm::DatabaseSet databases() { return {&db2x3(), nullptr}; }

// Bench rows repeat exactly up to the wall-clock columns; strip those before
// comparing.
void check_rows_match(const std::vector<ResultRow>& a, const std::vector<ResultRow>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].map_label == b[k].map_label);
    CHECK(a[k].mode == b[k].mode);
    CHECK(a[k].heuristic.kind == b[k].heuristic.kind);
    CHECK(a[k].window_mode == b[k].window_mode);
    CHECK(a[k].robots == b[k].robots);
    CHECK(a[k].trials == b[k].trials);
    CHECK(a[k].failures == b[k].failures);
    CHECK(a[k].makespan_mean == b[k].makespan_mean);
    CHECK(a[k].makespan_std == b[k].makespan_std);
    CHECK(a[k].ratio_mean == b[k].ratio_mean);
  }
}

}  // namespace

TEST_CASE("a lone robot's elapsed steps equal the sum of its goal legs") {
  ddm::GridGraph g(8, 8);
  DmpResult res = ddm::run_dmp(g, 1, {HeuristicKind::Manhattan}, databases(), 10, 314);

  CHECK(res.record.total_arrivals == 10);
  CHECK(res.record.elapsed_steps == res.arrivals.back().step);
  CHECK(res.record.throughput == 10.0 / res.record.elapsed_steps);
  REQUIRE(res.arrivals.size() == 10);
  REQUIRE(res.trace.size() == static_cast<std::size_t>(res.record.elapsed_steps) + 1);

  // with one robot every leg is walked at full speed, so consecutive arrival
  // positions in the trace are exactly a manhattan distance apart in time
  int prev_step = 0;
  Vertex prev_pos = res.trace.front()[0];
  int total = 0;
  for (const ddm::ArrivalEvent& ev : res.arrivals) {
    CHECK(ev.robot == 0);
    const Vertex pos = res.trace[ev.step][0];
    CHECK(ev.step - prev_step == ddm::manhattan(prev_pos, pos));
    total += ev.step - prev_step;
    prev_step = ev.step;
    prev_pos = pos;
  }
  CHECK(total == res.record.elapsed_steps);
}

TEST_CASE("dmp runs repeat exactly under one seed") {
  ddm::GridGraph g(12, 10);
  DmpResult a = ddm::run_dmp(g, 8, {HeuristicKind::Random}, databases(), 40, 2024);
  DmpResult b = ddm::run_dmp(g, 8, {HeuristicKind::Random}, databases(), 40, 2024);
  CHECK(a.record == b.record);
  CHECK(a.trace == b.trace);
  REQUIRE(a.arrivals.size() == b.arrivals.size());
  for (std::size_t k = 0; k < a.arrivals.size(); ++k) {
    CHECK(a.arrivals[k].robot == b.arrivals[k].robot);
    CHECK(a.arrivals[k].step == b.arrivals[k].step);
  }
}

TEST_CASE("dmp trajectories replay cleanly and report every arrival") {
  ddm::GridGraph g = ddm::random_low_res_map(6, 6, 2, 0.10, 99);
  const int n = 14, goals = 100;
  DmpResult res = ddm::run_dmp(g, n, {HeuristicKind::Occupancy}, databases(), goals, 555);

  ddm::ReplayReport rep = ddm::check_trajectories(g, res.trace);
  INFO(rep.message);
  CHECK(rep.ok);
  CHECK(res.trace.front() == ddm::random_scenario(g, n, 555).starts);

  // the final step may retire several robots at once, nothing more
  CHECK(res.record.total_arrivals >= goals);
  CHECK(res.record.total_arrivals < goals + n);
  CHECK(res.record.total_arrivals == static_cast<int>(res.arrivals.size()));
  CHECK(res.record.elapsed_steps == static_cast<int>(res.trace.size()) - 1);
  CHECK(res.record.throughput ==
        static_cast<double>(res.record.total_arrivals) / res.record.elapsed_steps);

  int prev_step = 0;
  for (const ddm::ArrivalEvent& ev : res.arrivals) {
    CHECK(ev.robot >= 0);
    CHECK(ev.robot < n);
    CHECK(ev.step >= prev_step);
    CHECK(ev.step <= res.record.elapsed_steps);
    prev_step = ev.step;
  }
}

TEST_CASE("dmp guards its preconditions") {
  ddm::GridGraph tiny(3, 3);
  CHECK(error_code_of([&] {
          ddm::run_dmp(tiny, 5, {HeuristicKind::Manhattan}, databases(), 10, 1);
        }) == ddm::ErrorCode::Capacity);
  CHECK(error_code_of([&] {
          ddm::run_dmp(tiny, 2, {HeuristicKind::Manhattan}, databases(), 1, 1);
        }) == ddm::ErrorCode::InvalidParameter);
  CHECK(error_code_of([&] {
          ddm::run_dmp(tiny, 0, {HeuristicKind::Manhattan}, databases(), 5, 1);
        }) == ddm::ErrorCode::InvalidParameter);
}

TEST_CASE("more robots clear the same workload faster when uncongested") {
  ddm::GridGraph g(20, 20);
  DmpResult few = ddm::run_dmp(g, 2, {HeuristicKind::Manhattan}, databases(), 60, 7);
  DmpResult many = ddm::run_dmp(g, 40, {HeuristicKind::Manhattan}, databases(), 60, 7);
  CHECK(many.record.elapsed_steps < few.record.elapsed_steps);
}

TEST_CASE("experiment cells are deterministic and reproducible per trial") {
  ExperimentSpec spec;
  spec.map.kind = MapSource::Kind::Free;
  spec.map.width = 10;
  spec.map.height = 8;
  spec.robot_counts = {4, 8};
  spec.heuristics = {{HeuristicKind::Random}, {HeuristicKind::Manhattan}};
  spec.trials = 3;
  spec.seed_base = 77;

  std::vector<ResultRow> rows = ddm::run_experiment(spec, databases());
  REQUIRE(rows.size() == 4);
  for (const ResultRow& row : rows) {
    CHECK(row.trials == 3);
    CHECK(row.failures == 0);
    CHECK(row.makespan_mean > 0.0);
    CHECK(row.ratio_mean >= 1.0);
  }
  CHECK(rows[0].heuristic.kind == HeuristicKind::Random);
  CHECK(rows[0].robots == 4);
  CHECK(rows[3].heuristic.kind == HeuristicKind::Manhattan);
  CHECK(rows[3].robots == 8);

  check_rows_match(rows, ddm::run_experiment(spec, databases()));

  // a worker pool must not change anything but timing
  ExperimentSpec pooled = spec;
  pooled.threads = 3;
  check_rows_match(rows, ddm::run_experiment(pooled, databases()));

  // cell 3 = (manhattan, 8 robots); its trials re-run in isolation from the
  // documented per-trial seeds
  ddm::GridGraph g(10, 8);
  double sum = 0.0;
  for (int t = 0; t < 3; ++t) {
    ddm::Scenario sc = ddm::random_scenario(g, 8, ddm::mix_seed(77, 3, t));
    sum += ddm::solve(sc, {HeuristicKind::Manhattan}, databases()).stats.makespan;
  }
  CHECK(rows[3].makespan_mean == sum / 3.0);
}

TEST_CASE("stalled trials are counted as failures, not dropped") {
  namespace fs = std::filesystem;
  const fs::path map_path = fs::temp_directory_path() / "ddm_corridor_bench.map";
  ddm::save_map(ddm::GridGraph(5, 1), map_path.string());

  ExperimentSpec spec;
  spec.map.kind = MapSource::Kind::File;
  spec.map.path = map_path.string();
  spec.robot_counts = {2};
  spec.heuristics = {{HeuristicKind::Manhattan}};
  spec.trials = 8;
  spec.seed_base = 12;

  std::vector<ResultRow> rows = ddm::run_experiment(spec, databases());
  std::remove(map_path.string().c_str());
  REQUIRE(rows.size() == 1);

  // recount stalls independently, trial by trial
  ddm::GridGraph corridor(5, 1);
  int stalls = 0;
  double success_sum = 0.0;
  for (int t = 0; t < 8; ++t) {
    ddm::Scenario sc = ddm::random_scenario(corridor, 2, ddm::mix_seed(12, 0, t));
    try {
      success_sum += ddm::solve(sc, {HeuristicKind::Manhattan}, databases()).stats.makespan;
    } catch (const ddm::Error& e) {
      REQUIRE(e.code() == ddm::ErrorCode::Stall);
      ++stalls;
    }
  }
  CHECK(rows[0].failures == stalls);
  CHECK(rows[0].failures > 0);
  CHECK(rows[0].failures < 8);
  CHECK(rows[0].makespan_mean == success_sum / (8 - stalls));
}

TEST_CASE("dmp experiment rows track elapsed steps") {
  ExperimentSpec spec;
  spec.map.kind = MapSource::Kind::Free;
  spec.map.width = 8;
  spec.map.height = 8;
  spec.robot_counts = {3};
  spec.heuristics = {{HeuristicKind::Manhattan}};
  spec.trials = 2;
  spec.seed_base = 5;
  spec.mode = RunMode::Dmp;
  spec.total_goals = 12;

  std::vector<ResultRow> rows = ddm::run_experiment(spec, databases());
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].failures == 0);
  CHECK(rows[0].makespan_mean > 0.0);
  CHECK(rows[0].ratio_mean == 0.0);
  check_rows_match(rows, ddm::run_experiment(spec, databases()));

  // one trial reproduced from its documented seed
  ddm::GridGraph g(8, 8);
  DmpResult direct = ddm::run_dmp(g, 3, {HeuristicKind::Manhattan}, databases(), 12,
                                  ddm::mix_seed(5, 0, 0));
  DmpResult direct2 = ddm::run_dmp(g, 3, {HeuristicKind::Manhattan}, databases(), 12,
                                   ddm::mix_seed(5, 0, 1));
  CHECK(rows[0].makespan_mean ==
        (direct.record.elapsed_steps + direct2.record.elapsed_steps) / 2.0);
}

TEST_CASE("warehouse lower bound equals independent shortest-path distances") {
  ddm::GridGraph g = ddm::generate_warehouse(8, 8, 5, 2, 3, 2);
  ddm::Scenario sc = ddm::random_scenario(g, 50, 4242);

  // oracle: plain hand-rolled BFS per robot
  int expect = 0;
  for (std::size_t r = 0; r < sc.starts.size(); ++r) {
    std::vector<int> dist(static_cast<std::size_t>(g.width()) * g.height(), -1);
    auto idx = [&](const Vertex& v) {
      return static_cast<std::size_t>(v.j - 1) * g.width() + (v.i - 1);
    };
    std::queue<Vertex> frontier;
    dist[idx(sc.starts[r])] = 0;
    frontier.push(sc.starts[r]);
    while (!frontier.empty()) {
      Vertex v = frontier.front();
      frontier.pop();
      const Vertex around[4] = {{v.i + 1, v.j}, {v.i - 1, v.j}, {v.i, v.j + 1}, {v.i, v.j - 1}};
      for (const Vertex& w : around)
        if (g.has_vertex(w) && dist[idx(w)] < 0) {
          dist[idx(w)] = dist[idx(v)] + 1;
          frontier.push(w);
        }
    }
    REQUIRE(dist[idx(sc.goals[r])] >= 0);
    expect = std::max(expect, dist[idx(sc.goals[r])]);
  }
  CHECK(ddm::makespan_lower_bound(g, sc) == expect);
}

TEST_CASE("heatmap counts reconcile with sampled path lengths") {
  ddm::GridGraph g(9, 7);
  ddm::Heatmap hm = ddm::occupancy_heatmap(g, 300, {HeuristicKind::Random}, 31);
  CHECK(hm.width == 9);
  CHECK(hm.height == 7);
  CHECK(hm.total() == hm.path_cells);
  CHECK(hm.path_cells >= 300);  // every path visits at least one cell

  ddm::Heatmap empty = ddm::occupancy_heatmap(g, 0, {HeuristicKind::Random}, 31);
  CHECK(empty.total() == 0);

  // obstacle maps route around blocked cells and still reconcile
  ddm::GridGraph rough = ddm::random_low_res_map(5, 5, 2, 0.15, 8);
  ddm::Heatmap hm2 = ddm::occupancy_heatmap(rough, 200, {HeuristicKind::Random}, 17);
  CHECK(hm2.total() == hm2.path_cells);
  for (int j = 1; j <= rough.height(); ++j)
    for (int i = 1; i <= rough.width(); ++i)
      if (!rough.has_vertex({i, j})) CHECK(hm2.at(i, j) == 0);

  CHECK(ddm::occupancy_heatmap(g, 50, {HeuristicKind::Random}, 31).counts ==
        ddm::occupancy_heatmap(g, 50, {HeuristicKind::Random}, 31).counts);
}

TEST_CASE("diversified paths thin out the center of a free grid") {
  ddm::GridGraph g(48, 27);
  const long pairs = 20000;
  ddm::Heatmap rnd = ddm::occupancy_heatmap(g, pairs, {HeuristicKind::Random}, 606);
  ddm::Heatmap far = ddm::occupancy_heatmap(g, pairs, {HeuristicKind::SingleTurnFar}, 606);

  auto region_mean = [](const ddm::Heatmap& hm, int i0, int i1, int j0, int j1) {
    double sum = 0.0;
    int cells = 0;
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) {
        sum += static_cast<double>(hm.at(i, j));
        ++cells;
      }
    return sum / cells;
  };
  auto border_mean = [](const ddm::Heatmap& hm) {
    double sum = 0.0;
    int cells = 0;
    for (int j = 1; j <= hm.height; ++j)
      for (int i = 1; i <= hm.width; ++i)
        if (i == 1 || i == hm.width || j == 1 || j == hm.height) {
          sum += static_cast<double>(hm.at(i, j));
          ++cells;
        }
    return sum / cells;
  };

  const double rnd_center = region_mean(rnd, 21, 28, 10, 17);
  const double far_center = region_mean(far, 21, 28, 10, 17);
  CHECK(rnd_center > border_mean(rnd));
  CHECK(far_center < rnd_center);
}

TEST_CASE("result files carry schema headers and match their rows") {
  ExperimentSpec spec;
  spec.map.kind = MapSource::Kind::Free;
  spec.map.width = 8;
  spec.map.height = 6;
  spec.robot_counts = {3};
  spec.heuristics = {{HeuristicKind::Manhattan}};
  spec.trials = 2;
  spec.seed_base = 9;
  std::vector<ResultRow> rows = ddm::run_experiment(spec, databases());

  std::ostringstream csv;
  ddm::write_results_csv(rows, csv);
  std::istringstream lines(csv.str());
  std::string line;
  REQUIRE(std::getline(lines, line));
  CHECK(line == "# ddm-bench-results v1");
  REQUIRE(std::getline(lines, line));
  CHECK(line.rfind("map,mode,heuristic,windows,robots", 0) == 0);
  REQUIRE(std::getline(lines, line));
  CHECK(line.rfind("free-8x6,one-shot,manhattan,2x3,3,2,0,", 0) == 0);
  CHECK_FALSE(std::getline(lines, line));

  std::ostringstream js;
  ddm::write_results_json(rows, js);
  nlohmann::json doc = nlohmann::json::parse(js.str());
  CHECK(doc["format"] == "ddm-bench-results");
  REQUIRE(doc["rows"].size() == 1);
  CHECK(doc["rows"][0]["robots"] == 3);
  CHECK(doc["rows"][0]["makespan_mean"] == rows[0].makespan_mean);
  CHECK(doc["rows"][0].contains("ratio_mean"));

  // dmp rows leave the inapplicable ratio column empty
  ResultRow dmp_row = rows[0];
  dmp_row.mode = RunMode::Dmp;
  std::ostringstream dmp_csv;
  ddm::write_results_csv({dmp_row}, dmp_csv);
  std::string dmp_line = dmp_csv.str();
  dmp_line = dmp_line.substr(dmp_line.rfind(',') + 1);
  CHECK(dmp_line == "\n");
  std::ostringstream dmp_js;
  ddm::write_results_json({dmp_row}, dmp_js);
  CHECK_FALSE(nlohmann::json::parse(dmp_js.str())["rows"][0].contains("ratio_mean"));

  ddm::SolveStats stats{17, 12, 17.0 / 12.0, 3, 4, 2, 1, 0, 99};
  std::ostringstream stats_js;
  ddm::write_stats_json(stats, stats_js);
  nlohmann::json sj = nlohmann::json::parse(stats_js.str());
  CHECK(sj["makespan"] == 17);
  CHECK(sj["lower_bound"] == 12);
  CHECK(sj["seed"] == 99);

  ddm::Heatmap hm = ddm::occupancy_heatmap(ddm::GridGraph(4, 3), 10,
                                           {HeuristicKind::Manhattan}, 2);
  std::ostringstream hm_csv;
  ddm::write_heatmap_csv(hm, hm_csv);
  std::istringstream hm_lines(hm_csv.str());
  REQUIRE(std::getline(hm_lines, line));
  CHECK(line == "# ddm-heatmap v1");
  int data_lines = 0;
  std::uint64_t csv_total = 0;
  while (std::getline(hm_lines, line)) {
    ++data_lines;
    std::istringstream fields(line);
    std::string field;
    int cols = 0;
    while (std::getline(fields, field, ',')) {
      csv_total += std::stoull(field);
      ++cols;
    }
    CHECK(cols == 4);
  }
  CHECK(data_lines == 3);
  CHECK(csv_total == hm.total());
}
