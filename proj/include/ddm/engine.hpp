#pragma once

#include <algorithm>
#include <chrono>
#include <deque>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ddm/grid.hpp"
#include "ddm/heuristics.hpp"
#include "ddm/subdb.hpp"

namespace ddm {

// Window shape policy: 2x3 mode builds only 2x3/3x2 windows; 3x3 mode prefers
// a 3x3 window and falls back to 2x3/3x2 when none fits.
enum class WindowMode { Only2x3, Prefer3x3 };

inline WindowMode parse_window_mode(const std::string& text) {
  if (text == "2x3") return WindowMode::Only2x3;
  if (text == "3x3") return WindowMode::Prefer3x3;
  fail(ErrorCode::InvalidParameter, "unknown window mode: " + text);
}

inline const char* window_mode_name(WindowMode m) {
  return m == WindowMode::Only2x3 ? "2x3" : "3x3";
}

// An axis-aligned obstacle-free rectangle reserved for local conflict
// resolution. Wide windows are 3 columns by 2 rows, tall ones 2 by 3; tall
// windows are transposed onto the canonical 2x3 cell grid.
enum class WindowShape { Wide2x3, Tall3x2, Square3x3 };

struct SubGraphWindow {
  Vertex anchor;  // minimum corner
  WindowShape shape = WindowShape::Wide2x3;

  int width() const { return shape == WindowShape::Tall3x2 ? 2 : 3; }
  int height() const { return shape == WindowShape::Wide2x3 ? 2 : 3; }

  SmallShape small_shape() const {
    return shape == WindowShape::Square3x3 ? SmallShape::S3x3 : SmallShape::S2x3;
  }

  bool contains(const Vertex& v) const {
    return v.i >= anchor.i && v.i < anchor.i + width() && v.j >= anchor.j &&
           v.j < anchor.j + height();
  }

  std::uint8_t local_cell(const Vertex& v) const {
    if (!contains(v)) fail(ErrorCode::InvalidVertex, to_string(v) + " outside window");
    int dx = v.i - anchor.i, dy = v.j - anchor.j;
    return static_cast<std::uint8_t>(shape == WindowShape::Tall3x2 ? dx * 3 + dy
                                                                   : dy * 3 + dx);
  }

  Vertex global_vertex(std::uint8_t cell) const {
    int hi = cell / 3, lo = cell % 3;
    return shape == WindowShape::Tall3x2 ? Vertex{anchor.i + hi, anchor.j + lo}
                                         : Vertex{anchor.i + lo, anchor.j + hi};
  }

  std::vector<Vertex> cells() const {
    std::vector<Vertex> out;
    for (int dj = 0; dj < height(); ++dj)
      for (int di = 0; di < width(); ++di) out.push_back({anchor.i + di, anchor.j + dj});
    return out;
  }

  bool overlaps(const SubGraphWindow& o) const {
    return anchor.i <= o.anchor.i + o.width() - 1 && o.anchor.i <= anchor.i + width() - 1 &&
           anchor.j <= o.anchor.j + o.height() - 1 && o.anchor.j <= anchor.j + height() - 1;
  }
};

// ---- conflict detection -------------------------------------------------------

struct ConflictReport {
  enum class Kind { Vertex, EdgeSwap };
  Kind kind = Kind::Vertex;
  int i = -1, j = -1;  // robot pair, i < j
  Vertex a, b;         // vertex: a == b == contested cell; edge: robot i's move a -> b
  int time = 0;        // timestep at which the collision would land
};

// All violating pairs for one synchronous move, robots scanned in index order.
inline std::vector<ConflictReport> detect_conflicts(const Configuration& current,
                                                    const Configuration& next, int time = 0) {
  if (current.size() != next.size())
    fail(ErrorCode::InvalidParameter, "configuration sizes differ");
  const int n = static_cast<int>(current.size());
  std::vector<ConflictReport> out;
  std::unordered_map<Vertex, std::vector<int>, VertexHash> arrivals;
  std::unordered_map<Vertex, std::vector<int>, VertexHash> movers_from;
  for (int r = 0; r < n; ++r)
    if (next[r] != current[r]) movers_from[current[r]].push_back(r);
  for (int j = 0; j < n; ++j) {
    std::vector<int>& list = arrivals[next[j]];
    for (int i : list)
      out.push_back({ConflictReport::Kind::Vertex, i, j, next[j], next[j], time});
    list.push_back(j);
    if (next[j] != current[j]) {
      auto it = movers_from.find(next[j]);
      if (it != movers_from.end())
        for (int i : it->second)
          if (i < j && next[i] == current[j])
            out.push_back(
                {ConflictReport::Kind::EdgeSwap, i, j, current[i], next[i], time});
    }
  }
  return out;
}

// Priority: robots with more of their path left to run first, index breaking
// ties; a pair sorts by its higher-priority member, then the other.
inline void sort_conflicts(std::vector<ConflictReport>& reports,
                           const std::vector<int>& remaining) {
  const int n = static_cast<int>(remaining.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    if (remaining[x] != remaining[y]) return remaining[x] > remaining[y];
    return x < y;
  });
  std::vector<int> rank(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) rank[order[k]] = k;
  std::stable_sort(reports.begin(), reports.end(),
                   [&](const ConflictReport& x, const ConflictReport& y) {
                     int xa = std::min(rank[x.i], rank[x.j]), xb = std::max(rank[x.i], rank[x.j]);
                     int ya = std::min(rank[y.i], rank[y.j]), yb = std::max(rank[y.i], rank[y.j]);
                     return xa != ya ? xa < ya : xb < yb;
                   });
}

inline std::vector<ConflictReport> detect_conflicts(const Configuration& current,
                                                    const Configuration& next,
                                                    const std::vector<int>& remaining,
                                                    int time) {
  std::vector<ConflictReport> out = detect_conflicts(current, next, time);
  sort_conflicts(out, remaining);
  return out;
}

// ---- window search ------------------------------------------------------------

enum class WindowOutcome { Window, Postpone, Skip };

struct WindowSearch {
  WindowOutcome outcome = WindowOutcome::Postpone;
  SubGraphWindow window;
};

struct WindowCandidates {
  WindowOutcome outcome = WindowOutcome::Postpone;
  std::vector<SubGraphWindow> windows;  // usable windows, best first
};

// Collects every obstacle-free window containing both conflicting robots'
// positions (the heads of their planned suffixes) that misses all active
// windows, ranked by the forward progress it covers: the sum of the farthest
// on-path index inside the window, ties in anchor row-major order with wide
// before tall. A window behind the pair tends to hand a pass-through robot a
// temp goal already pinned by a parked robot, which degenerates into an
// endless shuffle; scoring by path coverage keeps the choice deterministic
// and makes the picked window productive. The caller walks the list in order
// because the best-scored window can still be saturated with parked robots
// (solution moves nobody); a lesser candidate may have the slack to resolve.
// In Prefer3x3 mode every 3x3 window ranks ahead of the 2x3 ones. With no
// usable window at all: skip when only reservations were in the way,
// postpone when obstacles were.
inline WindowCandidates find_window_candidates(const GridGraph& g, const Path& path_a,
                                               const Path& path_b,
                                               const std::vector<SubGraphWindow>& active,
                                               WindowMode mode) {
  if (path_a.empty() || path_b.empty())
    fail(ErrorCode::InvalidParameter, "conflicting robots need non-empty paths");
  const Vertex a = path_a.front(), b = path_b.front();
  bool any_free = false;
  auto progress = [&](const SubGraphWindow& win) {
    auto farthest = [&](const Path& p) {
      for (int t = static_cast<int>(p.size()) - 1; t > 0; --t)
        if (win.contains(p[t])) return t;
      return 0;
    };
    return farthest(path_a) + farthest(path_b);
  };
  WindowCandidates out;
  auto scan = [&](std::initializer_list<WindowShape> shapes) {
    std::vector<std::pair<int, SubGraphWindow>> scored;
    for (WindowShape shape : shapes) {
      SubGraphWindow probe{{0, 0}, shape};
      int w = probe.width(), h = probe.height();
      int ilo = std::max(1, std::max(a.i, b.i) - w + 1);
      int ihi = std::min(std::min(a.i, b.i), g.width() - w + 1);
      int jlo = std::max(1, std::max(a.j, b.j) - h + 1);
      int jhi = std::min(std::min(a.j, b.j), g.height() - h + 1);
      for (int aj = jlo; aj <= jhi; ++aj)
        for (int ai = ilo; ai <= ihi; ++ai) {
          SubGraphWindow win{{ai, aj}, shape};
          bool free = true;
          for (int dj = 0; dj < h && free; ++dj)
            for (int di = 0; di < w && free; ++di)
              free = g.has_vertex({ai + di, aj + dj});
          if (!free) continue;
          bool clear = true;
          for (const SubGraphWindow& other : active)
            if (win.overlaps(other)) {
              clear = false;
              break;
            }
          if (!clear) {
            any_free = true;
            continue;
          }
          scored.emplace_back(progress(win), win);
        }
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    for (const auto& entry : scored) out.windows.push_back(entry.second);
  };
  if (mode == WindowMode::Prefer3x3) scan({WindowShape::Square3x3});
  scan({WindowShape::Wide2x3, WindowShape::Tall3x2});
  out.outcome = !out.windows.empty() ? WindowOutcome::Window
                : any_free           ? WindowOutcome::Skip
                                     : WindowOutcome::Postpone;
  return out;
}

// Best candidate only, for callers that need a single answer.
inline WindowSearch find_window(const GridGraph& g, const Path& path_a, const Path& path_b,
                                const std::vector<SubGraphWindow>& active, WindowMode mode) {
  WindowCandidates found = find_window_candidates(g, path_a, path_b, active, mode);
  if (found.outcome == WindowOutcome::Window)
    return {WindowOutcome::Window, found.windows.front()};
  return {found.outcome, {}};
}

// ---- temporary goals ------------------------------------------------------------

struct TempGoalResult {
  SmallConfig cells;               // window-local goal per robot, input order
  std::vector<int> splice_index;   // index into the robot's suffix whose vertex
                                   // is that goal, or -1 when randomized off-path
};

// Backward-scan goal assignment: each robot wants the last vertex of its
// planned suffix inside the window. Parked robots (single-vertex suffix) are
// pinned first; the rest claim in priority order, losers get a seeded-random
// unassigned window cell.
inline TempGoalResult assign_temp_goals(const SubGraphWindow& win,
                                        const std::vector<int>& robot_ids,
                                        const std::vector<Path>& suffixes, Rng& rng) {
  const std::size_t n = robot_ids.size();
  if (suffixes.size() != n)
    fail(ErrorCode::InvalidParameter, "one path suffix per robot required");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    bool px = suffixes[x].size() == 1, py = suffixes[y].size() == 1;
    if (px != py) return px;
    if (suffixes[x].size() != suffixes[y].size())
      return suffixes[x].size() > suffixes[y].size();
    return robot_ids[x] < robot_ids[y];
  });
  TempGoalResult out;
  out.cells.assign(n, 0);
  out.splice_index.assign(n, -1);
  std::uint16_t taken = 0;
  int cell_count = win.width() * win.height();
  for (std::size_t idx : order) {
    const Path& p = suffixes[idx];
    if (p.empty() || !win.contains(p.front()))
      fail(ErrorCode::InvalidParameter,
           "robot " + std::to_string(robot_ids[idx]) + " not inside the window");
    int found = -1;
    for (int t = static_cast<int>(p.size()) - 1; t >= 0; --t)
      if (win.contains(p[t])) {
        found = t;
        break;
      }
    std::uint8_t cand = win.local_cell(p[found]);
    if (!(taken & (1u << cand))) {
      out.cells[idx] = cand;
      out.splice_index[idx] = found;
      taken |= 1u << cand;
      continue;
    }
    std::vector<std::uint8_t> open;
    for (int c = 0; c < cell_count; ++c)
      if (!(taken & (1u << c))) open.push_back(static_cast<std::uint8_t>(c));
    std::uint8_t pick = open[rng.below(open.size())];
    out.cells[idx] = pick;
    out.splice_index[idx] = -1;
    taken |= 1u << pick;
  }
  return out;
}

// ---- engine ------------------------------------------------------------------

struct ActiveWindow {
  SubGraphWindow window;
  SmallSolution solution;  // window-local, column k belongs to robots[k]
  std::size_t cursor = 0;
  std::vector<int> robots;  // ascending robot ids
};

struct DatabaseSet {
  const SolutionDatabase* db_2x3 = nullptr;
  const SolutionDatabase* db_3x3 = nullptr;  // required in Prefer3x3 mode
};

struct EngineOptions {
  WindowMode window_mode = WindowMode::Only2x3;
  int stall_limit = 0;         // consecutive no-progress steps; 0 -> 3 * (w + h)
  bool record_history = true;  // keep the full configuration trace
};

class Engine {
 public:
  Engine(const Scenario& sc, const HeuristicSpec& h, const DatabaseSet& dbs,
         EngineOptions opt = {})
      : g_(sc.graph), goals_(sc.goals), heuristic_(h), dbs_(dbs), opt_(opt),
        rng_(mix_seed(sc.seed, 0x656e6769)), seed_(sc.seed) {
    if (!dbs_.db_2x3)
      fail(ErrorCode::InvalidParameter, "2x3 solution database required");
    if (dbs_.db_2x3->shape() != SmallShape::S2x3)
      fail(ErrorCode::InvalidParameter, "db_2x3 has the wrong shape");
    if (opt_.window_mode == WindowMode::Prefer3x3) {
      if (!dbs_.db_3x3)
        fail(ErrorCode::InvalidParameter, "3x3 mode needs a 3x3 database");
      if (dbs_.db_3x3->shape() != SmallShape::S3x3)
        fail(ErrorCode::InvalidParameter, "db_3x3 has the wrong shape");
    }
    if (opt_.stall_limit <= 0) opt_.stall_limit = 3 * (g_.width() + g_.height());
    const int n = sc.num_robots();
    std::vector<Path> init;
    if (heuristic_.kind == HeuristicKind::Occupancy) {
      occupancy_.emplace(g_);
      init = generate_initial_paths(sc, heuristic_, &*occupancy_, nullptr);
    } else if (heuristic_.kind == HeuristicKind::StateTime) {
      state_time_.emplace(g_, 4l * (g_.width() + g_.height()));
      init = generate_initial_paths(sc, heuristic_, nullptr, &*state_time_);
    } else {
      init = generate_initial_paths(sc, heuristic_);
    }
    current_ = sc.starts;
    planned_.resize(static_cast<std::size_t>(n));
    contributed_.resize(static_cast<std::size_t>(n));
    contributed_t0_.assign(static_cast<std::size_t>(n), 0);
    for (int r = 0; r < n; ++r) {
      planned_[r].assign(init[r].begin(), init[r].end());
      if (tracks_maps()) contributed_[r] = init[r];
    }
    in_window_.assign(static_cast<std::size_t>(n), 0);
    was_at_goal_.resize(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) was_at_goal_[r] = current_[r] == goals_[r];
    history_.push_back(current_);
  }

  int robot_count() const { return static_cast<int>(current_.size()); }
  int clock() const { return clock_; }
  const GridGraph& graph() const { return g_; }
  const Configuration& current() const { return current_; }
  const Configuration& goals() const { return goals_; }
  const std::vector<Configuration>& history() const { return history_; }
  const std::vector<ActiveWindow>& active_windows() const { return active_; }
  bool in_window(int r) const { return in_window_[r] != 0; }
  bool at_goal(int r) const { return current_[r] == goals_[r]; }
  int remaining(int r) const { return static_cast<int>(planned_[r].size()) - 1; }

  bool all_arrived() const {
    for (int r = 0; r < robot_count(); ++r)
      if (current_[r] != goals_[r]) return false;
    return true;
  }

  std::uint64_t conflicts() const { return conflicts_; }
  std::uint64_t windows_opened() const { return windows_; }
  std::uint64_t postpones() const { return postpones_; }
  std::uint64_t skips() const { return skips_; }

  // One synchronized timestep; returns the robots that arrived at their goals.
  std::vector<int> step() {
    const int n = robot_count();
    Configuration next = propose();
    std::vector<int> rem(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) rem[r] = remaining(r);
    std::vector<ConflictReport> reports = detect_conflicts(current_, next, rem, clock_ + 1);

    for (const ConflictReport& report : reports) {
      int i = report.i, j = report.j;
      if (in_window_[i] || in_window_[j]) {
        ++skips_;  // any window holding both would overlap the member's window
        continue;
      }
      Vertex ni = planned_[i].size() > 1 ? planned_[i][1] : current_[i];
      Vertex nj = planned_[j].size() > 1 ? planned_[j][1] : current_[j];
      bool vertex_clash = ni == nj;
      bool edge_clash = ni == current_[j] && nj == current_[i] && ni != current_[i];
      if (!vertex_clash && !edge_clash) continue;  // dissolved by earlier resolution
      ++conflicts_;
      std::vector<SubGraphWindow> reserved;
      reserved.reserve(active_.size());
      for (const ActiveWindow& aw : active_) reserved.push_back(aw.window);
      Path suffix_i(planned_[i].begin(), planned_[i].end());
      Path suffix_j(planned_[j].begin(), planned_[j].end());
      WindowCandidates found =
          find_window_candidates(g_, suffix_i, suffix_j, reserved, opt_.window_mode);
      auto postpone = [&] {
        int victim;
        if (rem[i] != rem[j])
          victim = rem[i] < rem[j] ? i : j;
        else
          victim = std::max(i, j);
        planned_[victim].insert(planned_[victim].begin() + 1, current_[victim]);
        rem[victim] = remaining(victim);
        ++postpones_;
      };
      if (found.outcome == WindowOutcome::Skip) {
        ++skips_;
      } else if (found.outcome == WindowOutcome::Postpone) {
        postpone();
      } else {
        bool opened = false;
        for (const SubGraphWindow& win : found.windows)
          if (try_open_window(win)) {
            ++windows_;
            opened = true;
            break;
          }
        // every candidate was saturated with parked robots; waiting a step is
        // the only remaining move
        if (!opened) postpone();
      }
    }

    // staged execution: windows advance unconditionally; everyone else moves
    // unless entering a reserved window or tangled in a residual collision
    Configuration staged = current_;
    std::vector<char> frozen(static_cast<std::size_t>(n), 0);
    for (const ActiveWindow& aw : active_)
      for (std::size_t k = 0; k < aw.robots.size(); ++k)
        staged[aw.robots[k]] =
            aw.window.global_vertex(aw.solution.steps[aw.cursor + 1][k]);
    for (int r = 0; r < n; ++r)
      if (!in_window_[r] && planned_[r].size() > 1) staged[r] = planned_[r][1];
    for (int r = 0; r < n; ++r) {
      if (in_window_[r] || staged[r] == current_[r]) continue;
      for (const ActiveWindow& aw : active_)
        if (aw.window.contains(staged[r])) {
          staged[r] = current_[r];
          frozen[r] = 1;
          break;
        }
    }
    for (;;) {
      std::vector<ConflictReport> residual = detect_conflicts(current_, staged, clock_ + 1);
      if (residual.empty()) break;
      bool changed = false;
      for (const ConflictReport& report : residual)
        for (int r : {report.i, report.j})
          if (!in_window_[r] && !frozen[r] && staged[r] != current_[r]) {
            staged[r] = current_[r];
            frozen[r] = 1;
            changed = true;
          }
      if (!changed)
        fail(ErrorCode::Stall,
             "unresolvable staged collision at step " + std::to_string(clock_ + 1));
    }

    bool any_moved = false;
    for (int r = 0; r < n; ++r)
      if (staged[r] != current_[r]) {
        any_moved = true;
        break;
      }
    for (int r = 0; r < n; ++r) {
      if (in_window_[r]) {
        planned_[r].pop_front();  // spliced plan mirrors the window solution
      } else if (!frozen[r] && planned_[r].size() > 1) {
        planned_[r].pop_front();
      }
    }
    current_ = staged;

    for (auto it = active_.begin(); it != active_.end();) {
      ++it->cursor;
      if (it->cursor + 1 >= it->solution.steps.size()) {
        for (int r : it->robots) in_window_[r] = 0;
        it = active_.erase(it);
      } else {
        ++it;
      }
    }

    ++clock_;
    if (opt_.record_history) history_.push_back(current_);
    if (any_moved)
      stall_streak_ = 0;
    else if (++stall_streak_ >= opt_.stall_limit)
      fail(ErrorCode::Stall, stall_diagnostic());

    std::vector<int> arrivals;
    for (int r = 0; r < n; ++r) {
      bool at = current_[r] == goals_[r];
      if (at && !was_at_goal_[r]) arrivals.push_back(r);
      was_at_goal_[r] = at;
    }
    return arrivals;
  }

  // Re-targets one robot mid-run (the dynamic-goal driver). The fresh route is
  // planned with the engine's heuristic; a robot mid-window keeps its window
  // commitment and the new route continues from the window exit.
  void set_goal(int robot, const Vertex& goal) {
    if (robot < 0 || robot >= robot_count())
      fail(ErrorCode::InvalidParameter, "no such robot: " + std::to_string(robot));
    g_.require_vertex(goal);
    for (int s = 0; s < robot_count(); ++s)
      if (s != robot && goals_[s] == goal)
        fail(ErrorCode::InvalidParameter, "goal " + to_string(goal) + " already assigned");
    std::size_t keep = 1;
    if (in_window_[robot])
      for (const ActiveWindow& aw : active_)
        if (std::find(aw.robots.begin(), aw.robots.end(), robot) != aw.robots.end()) {
          keep = aw.solution.steps.size() - aw.cursor;
          break;
        }
    Vertex depart = planned_[robot][keep - 1];
    goals_[robot] = goal;
    Path cont = plan_route(depart, goal, clock_ + static_cast<long>(keep) - 1);
    planned_[robot].erase(planned_[robot].begin() + static_cast<std::ptrdiff_t>(keep),
                          planned_[robot].end());
    for (std::size_t k = 1; k < cont.size(); ++k) planned_[robot].push_back(cont[k]);
    if (tracks_maps()) {
      Path fresh(planned_[robot].begin(), planned_[robot].end());
      if (occupancy_) {
        occupancy_->remove_path(contributed_[robot]);
        occupancy_->add_path(fresh);
      } else {
        state_time_->remove_path(contributed_[robot], contributed_t0_[robot]);
        state_time_->add_path(fresh, clock_);
      }
      contributed_[robot] = std::move(fresh);
      contributed_t0_[robot] = clock_;
    }
    was_at_goal_[robot] = current_[robot] == goal;
  }

 private:
  bool tracks_maps() const {
    return heuristic_.kind == HeuristicKind::Occupancy ||
           heuristic_.kind == HeuristicKind::StateTime;
  }

  Configuration propose() const {
    Configuration next = current_;
    for (int r = 0; r < robot_count(); ++r)
      if (!in_window_[r] && planned_[r].size() > 1) next[r] = planned_[r][1];
    for (const ActiveWindow& aw : active_)
      for (std::size_t k = 0; k < aw.robots.size(); ++k)
        next[aw.robots[k]] = aw.window.global_vertex(aw.solution.steps[aw.cursor + 1][k]);
    return next;
  }

  Path plan_route(const Vertex& from, const Vertex& to, long t0) {
    std::uint64_t divisor = static_cast<std::uint64_t>(robot_count());
    try {
      switch (heuristic_.kind) {
        case HeuristicKind::Random:
          return random_shortest_path(g_, from, to, rng_);
        case HeuristicKind::SingleTurnFar:
        case HeuristicKind::SingleTurnNear:
        case HeuristicKind::SingleTurnMixed:
          return single_turn_path(g_, from, to, heuristic_.kind, heuristic_.ratio, rng_);
        case HeuristicKind::Occupancy:
          return astar_path(g_, from, to, HeuristicKind::Occupancy, &*occupancy_, nullptr,
                            divisor);
        case HeuristicKind::StateTime:
          return astar_path(g_, from, to, HeuristicKind::StateTime, nullptr, &*state_time_,
                            divisor, t0);
        default:
          return astar_path(g_, from, to, HeuristicKind::Manhattan);
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotApplicable) throw;
      return astar_path(g_, from, to, HeuristicKind::Manhattan);
    }
  }

  // Reserves the window, solves the members' temp-goal sub-problem, and
  // splices that solution into their plans. Returns false without touching
  // any plan when the solution moves nobody (makespan zero, every temp goal
  // equal to the robot's current cell), which happens when parked robots
  // saturate the window: opening such a window resolves nothing and would
  // repeat forever, so the caller moves on to the next candidate.
  bool try_open_window(const SubGraphWindow& win) {
    std::vector<int> inside;
    for (int r = 0; r < robot_count(); ++r)
      if (!in_window_[r] && win.contains(current_[r])) inside.push_back(r);
    std::vector<Path> suffixes;
    suffixes.reserve(inside.size());
    for (int r : inside) suffixes.emplace_back(planned_[r].begin(), planned_[r].end());
    TempGoalResult temp = assign_temp_goals(win, inside, suffixes, rng_);
    SmallConfig xi;
    xi.reserve(inside.size());
    for (int r : inside) xi.push_back(win.local_cell(current_[r]));
    const SolutionDatabase* db =
        win.small_shape() == SmallShape::S3x3 ? dbs_.db_3x3 : dbs_.db_2x3;
    SmallSolution sol = db->lookup(xi, temp.cells);
    if (sol.makespan() == 0) return false;
    for (std::size_t k = 0; k < inside.size(); ++k) {
      int r = inside[k];
      std::deque<Vertex> fresh;
      for (const SmallConfig& step : sol.steps)
        fresh.push_back(win.global_vertex(step[k]));
      if (temp.splice_index[k] >= 0) {
        for (std::size_t t = static_cast<std::size_t>(temp.splice_index[k]) + 1;
             t < suffixes[k].size(); ++t)
          fresh.push_back(suffixes[k][t]);
      } else {
        // randomized temp goal: the old path is unusable from here, so route
        // anew with the robot's own heuristic (a fresh draw for the random
        // rules, which is also what shakes repeat collisions apart)
        Path cont = plan_route(win.global_vertex(temp.cells[k]), goals_[r],
                               clock_ + static_cast<long>(sol.steps.size()) - 1);
        for (std::size_t t = 1; t < cont.size(); ++t) fresh.push_back(cont[t]);
      }
      planned_[r] = std::move(fresh);
    }
    for (int r : inside) in_window_[r] = 1;
    active_.push_back({win, std::move(sol), 0, std::move(inside)});
    return true;
  }

  std::string stall_diagnostic() const {
    std::string msg = "no robot moved for " + std::to_string(stall_streak_) +
                      " steps at step " + std::to_string(clock_) + "; " +
                      std::to_string(active_.size()) + " active windows; stuck robots:";
    int listed = 0;
    for (int r = 0; r < robot_count() && listed < 8; ++r) {
      if (current_[r] == goals_[r]) continue;
      msg += " " + std::to_string(r) + "@" + to_string(current_[r]) + "->" +
             to_string(planned_[r].size() > 1 ? planned_[r][1] : current_[r]);
      ++listed;
    }
    return msg;
  }

  GridGraph g_;
  Configuration current_;
  Configuration goals_;
  HeuristicSpec heuristic_;
  DatabaseSet dbs_;
  EngineOptions opt_;
  Rng rng_;
  std::uint64_t seed_;
  std::vector<std::deque<Vertex>> planned_;
  std::optional<OccupancyMap> occupancy_;
  std::optional<StateTimeMap> state_time_;
  std::vector<Path> contributed_;      // what each robot last added to the maps
  std::vector<long> contributed_t0_;
  std::vector<ActiveWindow> active_;
  std::vector<char> in_window_;
  std::vector<char> was_at_goal_;
  std::vector<Configuration> history_;
  int clock_ = 0;
  int stall_streak_ = 0;
  std::uint64_t conflicts_ = 0, windows_ = 0, postpones_ = 0, skips_ = 0;
};

// ---- one-shot driver ------------------------------------------------------------

struct SolveStats {
  int makespan = 0;
  int lower_bound = 0;
  double ratio = 1.0;
  std::uint64_t wall_ms = 0;
  std::uint64_t conflicts = 0;
  std::uint64_t windows = 0;
  std::uint64_t postpones = 0;
  std::uint64_t skips = 0;
  std::uint64_t seed = 0;
};

struct SolveResult {
  std::vector<Configuration> trace;  // trace[t][r], t = 0..makespan
  SolveStats stats;
};

// Longest single-robot shortest path; no trajectory can beat it.
inline int makespan_lower_bound(const GridGraph& g, const Scenario& sc) {
  int lb = 0;
  for (std::size_t r = 0; r < sc.starts.size(); ++r) {
    std::vector<int> dist = bfs_distances(g, sc.goals[r]);
    int d = dist[g.index(sc.starts[r])];
    if (d < 0)
      fail(ErrorCode::NoPath, "goal unreachable for robot " + std::to_string(r));
    lb = std::max(lb, d);
  }
  return lb;
}

inline SolveResult solve(const Scenario& sc, const HeuristicSpec& h, const DatabaseSet& dbs,
                         EngineOptions opt = {}) {
  auto wall0 = std::chrono::steady_clock::now();
  Engine engine(sc, h, dbs, opt);
  while (!engine.all_arrived()) engine.step();
  auto wall1 = std::chrono::steady_clock::now();
  SolveResult out;
  out.trace = engine.history();
  out.stats.makespan = engine.clock();
  out.stats.lower_bound = makespan_lower_bound(sc.graph, sc);
  out.stats.ratio = out.stats.lower_bound > 0
                        ? static_cast<double>(out.stats.makespan) / out.stats.lower_bound
                        : 1.0;
  out.stats.wall_ms = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(wall1 - wall0).count());
  out.stats.conflicts = engine.conflicts();
  out.stats.windows = engine.windows_opened();
  out.stats.postpones = engine.postpones();
  out.stats.skips = engine.skips();
  out.stats.seed = sc.seed;
  return out;
}

inline std::vector<Path> per_robot_paths(const std::vector<Configuration>& trace) {
  if (trace.empty()) fail(ErrorCode::InvalidParameter, "trace has no timesteps");
  std::vector<Path> paths(trace[0].size());
  for (std::size_t r = 0; r < paths.size(); ++r) {
    paths[r].reserve(trace.size());
    for (const Configuration& config : trace) paths[r].push_back(config[r]);
  }
  return paths;
}

}  // namespace ddm
