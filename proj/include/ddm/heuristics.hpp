#pragma once

#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "ddm/error.hpp"
#include "ddm/grid.hpp"
#include "ddm/rng.hpp"

namespace ddm {

enum class HeuristicKind {
  Random,
  SingleTurnFar,
  SingleTurnNear,
  SingleTurnMixed,
  Manhattan,
  Occupancy,
  StateTime,
};

struct HeuristicSpec {
  HeuristicKind kind = HeuristicKind::Random;
  double ratio = 0.85;  // far-turn probability for SingleTurnMixed
};

inline HeuristicSpec parse_heuristic(const std::string& text) {
  if (text == "random") return {HeuristicKind::Random};
  if (text == "turn-far") return {HeuristicKind::SingleTurnFar};
  if (text == "turn-near") return {HeuristicKind::SingleTurnNear};
  if (text == "manhattan") return {HeuristicKind::Manhattan};
  if (text == "occupancy") return {HeuristicKind::Occupancy};
  if (text == "state-time") return {HeuristicKind::StateTime};
  if (text.rfind("turn-mixed", 0) == 0) {
    HeuristicSpec spec{HeuristicKind::SingleTurnMixed};
    if (text.size() > 10) {
      if (text[10] != '=')
        fail(ErrorCode::InvalidParameter, "bad heuristic spec: " + text);
      try {
        spec.ratio = std::stod(text.substr(11));
      } catch (const std::exception&) {
        fail(ErrorCode::InvalidParameter, "bad mixed ratio in: " + text);
      }
      if (spec.ratio < 0.0 || spec.ratio > 1.0)
        fail(ErrorCode::InvalidParameter, "mixed ratio must be in [0,1]");
    }
    return spec;
  }
  fail(ErrorCode::InvalidParameter, "unknown heuristic: " + text);
}

inline std::string heuristic_name(const HeuristicSpec& spec) {
  switch (spec.kind) {
    case HeuristicKind::Random: return "random";
    case HeuristicKind::SingleTurnFar: return "turn-far";
    case HeuristicKind::SingleTurnNear: return "turn-near";
    case HeuristicKind::SingleTurnMixed: return "turn-mixed=" + std::to_string(spec.ratio);
    case HeuristicKind::Manhattan: return "manhattan";
    case HeuristicKind::Occupancy: return "occupancy";
    case HeuristicKind::StateTime: return "state-time";
  }
  return "?";
}

inline int manhattan(const Vertex& a, const Vertex& b) {
  return std::abs(a.i - b.i) + std::abs(a.j - b.j);
}

// Per-vertex traversal counts shared by the Occupancy heuristic and the
// heatmap tooling.
class OccupancyMap {
 public:
  OccupancyMap() = default;
  explicit OccupancyMap(const GridGraph& g)
      : width_(g.width()), height_(g.height()),
        counts_(static_cast<std::size_t>(g.width()) * g.height(), 0) {}

  std::uint64_t at(const Vertex& v) const { return counts_[index(v)]; }
  std::uint64_t total() const { return total_; }

  void add(const Vertex& v) {
    ++counts_[index(v)];
    ++total_;
  }

  void remove(const Vertex& v) {
    std::uint64_t& c = counts_[index(v)];
    if (c == 0) fail(ErrorCode::InvalidParameter, "occupancy underflow at " + to_string(v));
    --c;
    --total_;
  }

  void add_path(const Path& p) {
    for (const Vertex& v : p) add(v);
  }

  void remove_path(const Path& p) {
    for (const Vertex& v : p) remove(v);
  }

 private:
  std::size_t index(const Vertex& v) const {
    if (v.i < 1 || v.i > width_ || v.j < 1 || v.j > height_)
      fail(ErrorCode::InvalidVertex, "outside occupancy map: " + to_string(v));
    return static_cast<std::size_t>(v.j - 1) * width_ + (v.i - 1);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

// Usage counts of (vertex, t) and (edge, t) states. Edges are undirected:
// two robots crossing the same edge at the same arrival time are exactly the
// head-to-head case the penalty exists to discourage. Times saturate at the
// horizon.
class StateTimeMap {
 public:
  StateTimeMap() = default;
  StateTimeMap(const GridGraph& g, long horizon)
      : cells_(g.cell_count()), width_(g.width()), horizon_(horizon) {
    if (horizon < 0) fail(ErrorCode::InvalidParameter, "horizon must be non-negative");
  }

  long horizon() const { return horizon_; }

  std::uint64_t vertex_count(const Vertex& v, long t) const {
    auto it = counts_.find(vertex_key(v, t));
    return it == counts_.end() ? 0 : it->second;
  }

  std::uint64_t edge_count(const Vertex& u, const Vertex& v, long t) const {
    auto it = counts_.find(edge_key(u, v, t));
    return it == counts_.end() ? 0 : it->second;
  }

  void add_visit(const Vertex& v, long t) { ++counts_[vertex_key(v, t)]; }
  void add_transit(const Vertex& u, const Vertex& v, long t) { ++counts_[edge_key(u, v, t)]; }

  void remove_visit(const Vertex& v, long t) { decrement(vertex_key(v, t)); }
  void remove_transit(const Vertex& u, const Vertex& v, long t) { decrement(edge_key(u, v, t)); }

  // Registers a path whose first waypoint sits at absolute time t0.
  void add_path(const Path& p, long t0) {
    for (std::size_t k = 0; k < p.size(); ++k) add_visit(p[k], t0 + static_cast<long>(k));
    for (std::size_t k = 1; k < p.size(); ++k)
      add_transit(p[k - 1], p[k], t0 + static_cast<long>(k));
  }

  void remove_path(const Path& p, long t0) {
    for (std::size_t k = 0; k < p.size(); ++k) remove_visit(p[k], t0 + static_cast<long>(k));
    for (std::size_t k = 1; k < p.size(); ++k)
      remove_transit(p[k - 1], p[k], t0 + static_cast<long>(k));
  }

 private:
  void decrement(std::uint64_t key) {
    auto it = counts_.find(key);
    if (it == counts_.end() || it->second == 0)
      fail(ErrorCode::InvalidParameter, "state-time underflow");
    if (--it->second == 0) counts_.erase(it);
  }

  std::uint64_t cell(const Vertex& v) const {
    return static_cast<std::uint64_t>(v.j - 1) * width_ + (v.i - 1);
  }

  long clamp(long t) const { return t < horizon_ ? t : horizon_; }

  std::uint64_t vertex_key(const Vertex& v, long t) const {
    return (static_cast<std::uint64_t>(clamp(t)) * cells_ + cell(v)) * 2;
  }

  std::uint64_t edge_key(const Vertex& u, const Vertex& v, long t) const {
    std::uint64_t a = cell(u), b = cell(v);
    if (a > b) std::swap(a, b);
    return ((static_cast<std::uint64_t>(clamp(t)) * cells_ + a) * cells_ + b) * 2 + 1;
  }

  std::uint64_t cells_ = 0;
  int width_ = 0;
  long horizon_ = 0;
  std::unordered_map<std::uint64_t, std::uint64_t> counts_;
};

namespace detail {

// Requires the whole monotone rectangle between s and t to be obstacle-free;
// the monotone constructors only make sense there, callers fall back to A*
// otherwise.
inline void require_free_rectangle(const GridGraph& g, const Vertex& s, const Vertex& t) {
  g.require_vertex(s);
  g.require_vertex(t);
  for (int j = std::min(s.j, t.j); j <= std::max(s.j, t.j); ++j)
    for (int i = std::min(s.i, t.i); i <= std::max(s.i, t.i); ++i)
      if (g.blocked({i, j}))
        fail(ErrorCode::NotApplicable,
             "monotone rectangle " + to_string(s) + ".." + to_string(t) + " is blocked");
}

}  // namespace detail

// Monotone staircase path, uniform over all C(dx+dy, dx) move orderings:
// at each step the axis is drawn with probability proportional to the
// remaining displacement along it.
inline Path random_shortest_path(const GridGraph& g, const Vertex& s, const Vertex& t, Rng& rng) {
  detail::require_free_rectangle(g, s, t);
  int dx = std::abs(t.i - s.i), dy = std::abs(t.j - s.j);
  int sx = t.i > s.i ? 1 : -1, sy = t.j > s.j ? 1 : -1;
  Path path{s};
  Vertex cur = s;
  while (dx + dy > 0) {
    if (rng.below(static_cast<std::uint64_t>(dx + dy)) < static_cast<std::uint64_t>(dx)) {
      cur.i += sx;
      --dx;
    } else {
      cur.j += sy;
      --dy;
    }
    path.push_back(cur);
  }
  return path;
}

// L-shaped shortest path with at most one turn. The two candidate corners are
// compared by Euclidean distance from the grid center ((w+1)/2, (h+1)/2);
// squared distances are compared in quarter units to stay in integers. On a
// tie the corner reached by moving along the x-axis first wins.
inline Path single_turn_path(const GridGraph& g, const Vertex& s, const Vertex& t,
                             HeuristicKind mode, double ratio, Rng& rng) {
  if (mode != HeuristicKind::SingleTurnFar && mode != HeuristicKind::SingleTurnNear &&
      mode != HeuristicKind::SingleTurnMixed)
    fail(ErrorCode::InvalidParameter, "single_turn_path needs a single-turn mode");
  if (ratio < 0.0 || ratio > 1.0)
    fail(ErrorCode::InvalidParameter, "mixed ratio must be in [0,1]");
  detail::require_free_rectangle(g, s, t);

  auto walk = [](Path& path, Vertex& cur, const Vertex& to) {
    int sx = to.i > cur.i ? 1 : -1, sy = to.j > cur.j ? 1 : -1;
    while (cur.i != to.i) {
      cur.i += sx;
      path.push_back(cur);
    }
    while (cur.j != to.j) {
      cur.j += sy;
      path.push_back(cur);
    }
  };

  Path path{s};
  Vertex cur = s;
  if (s.i == t.i || s.j == t.j) {
    walk(path, cur, t);
    return path;
  }

  Vertex x_first{t.i, s.j}, y_first{s.i, t.j};
  auto center_dist2 = [&](const Vertex& v) {
    long di = 2l * v.i - (g.width() + 1), dj = 2l * v.j - (g.height() + 1);
    return di * di + dj * dj;
  };
  bool far_turn;
  switch (mode) {
    case HeuristicKind::SingleTurnFar: far_turn = true; break;
    case HeuristicKind::SingleTurnNear: far_turn = false; break;
    default: far_turn = rng.chance(ratio); break;
  }
  long dx2 = center_dist2(x_first), dy2 = center_dist2(y_first);
  Vertex corner;
  if (dx2 == dy2)
    corner = x_first;
  else if (far_turn)
    corner = dx2 > dy2 ? x_first : y_first;
  else
    corner = dx2 < dy2 ? x_first : y_first;
  walk(path, cur, corner);
  walk(path, cur, t);
  return path;
}

// Re-expansion-free A*. f = divisor*(cost + manhattan) + penalty, kept in
// integers so ties are exact; ties prefer larger cost-so-far, then earlier
// insertion (children are pushed in the fixed E,W,N,S order). For StateTime
// the search state is (vertex, time) with time saturating at the map horizon.
inline Path astar_path(const GridGraph& g, const Vertex& s, const Vertex& t, HeuristicKind kind,
                       const OccupancyMap* occupancy = nullptr,
                       const StateTimeMap* state_time = nullptr, std::uint64_t divisor = 1,
                       long t0 = 0) {
  g.require_vertex(s);
  g.require_vertex(t);
  if (kind != HeuristicKind::Manhattan && kind != HeuristicKind::Occupancy &&
      kind != HeuristicKind::StateTime)
    fail(ErrorCode::InvalidParameter, "astar_path supports manhattan/occupancy/state-time");
  if (kind == HeuristicKind::Occupancy && occupancy == nullptr)
    fail(ErrorCode::InvalidParameter, "occupancy map required");
  if (kind == HeuristicKind::StateTime && state_time == nullptr)
    fail(ErrorCode::InvalidParameter, "state-time map required");
  if (divisor == 0) fail(ErrorCode::InvalidParameter, "penalty divisor must be positive");
  if (s == t) return {s};

  const bool timed = kind == HeuristicKind::StateTime;
  const long horizon = timed ? state_time->horizon() : 0;
  auto state_of = [&](const Vertex& v, long t_abs) {
    std::uint64_t cell = g.index(v);
    if (!timed) return cell;
    long tc = t_abs < horizon ? t_abs : horizon;
    return static_cast<std::uint64_t>(tc) * g.cell_count() + cell;
  };

  struct QueueEntry {
    std::int64_t f;
    std::int64_t g_cost;
    std::uint64_t seq;
    std::uint64_t state;
    Vertex v;
    std::uint64_t parent_state;
    Vertex parent_v;
  };
  struct Worse {
    bool operator()(const QueueEntry& a, const QueueEntry& b) const {
      if (a.f != b.f) return a.f > b.f;
      if (a.g_cost != b.g_cost) return a.g_cost < b.g_cost;
      return a.seq > b.seq;
    }
  };

  struct Settled {
    Vertex v;
    std::uint64_t parent_state;
    Vertex parent_v;
  };
  std::unordered_map<std::uint64_t, Settled> settled;
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, Worse> open;
  std::uint64_t seq = 0;

  auto penalty_of = [&](const Vertex& v, const Vertex& parent, long t_abs) -> std::int64_t {
    switch (kind) {
      case HeuristicKind::Occupancy:
        return static_cast<std::int64_t>(occupancy->at(v));
      case HeuristicKind::StateTime:
        return static_cast<std::int64_t>(state_time->vertex_count(v, t_abs) +
                                         state_time->edge_count(parent, v, t_abs));
      default:
        return 0;
    }
  };

  std::uint64_t start_state = state_of(s, t0);
  open.push({static_cast<std::int64_t>(divisor) * manhattan(s, t), 0, seq++, start_state, s,
             start_state, s});
  while (!open.empty()) {
    QueueEntry e = open.top();
    open.pop();
    if (settled.count(e.state)) continue;
    settled[e.state] = {e.v, e.parent_state, e.parent_v};
    if (e.v == t) {
      Path path;
      std::uint64_t st = e.state;
      for (;;) {
        const Settled& node = settled[st];
        path.push_back(node.v);
        if (st == start_state) break;
        st = node.parent_state;
      }
      std::reverse(path.begin(), path.end());
      return path;
    }
    Vertex buf[4];
    int cnt = neighbors(g, e.v, buf);
    long t_next = t0 + e.g_cost + 1;
    for (int k = 0; k < cnt; ++k) {
      std::uint64_t ns = state_of(buf[k], t_next);
      if (settled.count(ns)) continue;
      std::int64_t ng = e.g_cost + 1;
      std::int64_t f = static_cast<std::int64_t>(divisor) * (ng + manhattan(buf[k], t)) +
                       penalty_of(buf[k], e.v, t_next);
      open.push({f, ng, seq++, ns, buf[k], e.state, e.v});
    }
  }
  fail(ErrorCode::NoPath, "no path " + to_string(s) + " -> " + to_string(t));
}

namespace detail {

// Planning order for the map-based heuristics: longest manhattan distance
// first, robot index as tiebreak.
inline std::vector<int> initial_order(const Scenario& sc) {
  std::vector<int> order(static_cast<std::size_t>(sc.num_robots()));
  for (std::size_t r = 0; r < order.size(); ++r) order[r] = static_cast<int>(r);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    int da = manhattan(sc.starts[a], sc.goals[a]);
    int db = manhattan(sc.starts[b], sc.goals[b]);
    return da != db ? da > db : a < b;
  });
  return order;
}

}  // namespace detail

// Initial path batch for a scenario. Occupancy/StateTime process robots in
// descending manhattan(start, goal) order (robot index breaks ties) and feed
// each finished path back into the shared map; the map used is returned via
// the optional out-params so callers can keep updating it.
inline std::vector<Path> generate_initial_paths(const Scenario& sc, const HeuristicSpec& h,
                                                OccupancyMap* occupancy_out = nullptr,
                                                StateTimeMap* state_time_out = nullptr) {
  const GridGraph& g = sc.graph;
  const int n = sc.num_robots();
  std::vector<Path> paths(static_cast<std::size_t>(n));

  auto plan_plain = [&](int r, Rng& rng) -> Path {
    switch (h.kind) {
      case HeuristicKind::Random:
        return random_shortest_path(g, sc.starts[r], sc.goals[r], rng);
      case HeuristicKind::SingleTurnFar:
      case HeuristicKind::SingleTurnNear:
      case HeuristicKind::SingleTurnMixed:
        return single_turn_path(g, sc.starts[r], sc.goals[r], h.kind, h.ratio, rng);
      default:
        return astar_path(g, sc.starts[r], sc.goals[r], HeuristicKind::Manhattan);
    }
  };

  auto named = [&](int r, auto&& plan) -> Path {
    try {
      return plan();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoPath) throw;
      fail(ErrorCode::NoPath, "robot " + std::to_string(r) + ": " + e.what());
    }
  };

  if (h.kind == HeuristicKind::Occupancy) {
    OccupancyMap local(g);
    OccupancyMap& occ = occupancy_out ? (*occupancy_out = OccupancyMap(g)) : local;
    for (int r : detail::initial_order(sc)) {
      paths[r] = named(r, [&] {
        return astar_path(g, sc.starts[r], sc.goals[r], HeuristicKind::Occupancy, &occ, nullptr,
                          static_cast<std::uint64_t>(n));
      });
      occ.add_path(paths[r]);
    }
  } else if (h.kind == HeuristicKind::StateTime) {
    long horizon = 4l * (g.width() + g.height());
    StateTimeMap local(g, horizon);
    StateTimeMap& st = state_time_out ? (*state_time_out = StateTimeMap(g, horizon)) : local;
    for (int r : detail::initial_order(sc)) {
      paths[r] = named(r, [&] {
        return astar_path(g, sc.starts[r], sc.goals[r], HeuristicKind::StateTime, nullptr, &st,
                          static_cast<std::uint64_t>(n));
      });
      st.add_path(paths[r], 0);
    }
  } else {
    for (int r = 0; r < n; ++r) {
      Rng rng(mix_seed(sc.seed, 0x706174, static_cast<std::uint64_t>(r)));
      paths[r] = named(r, [&]() -> Path {
        try {
          return plan_plain(r, rng);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NotApplicable) throw;
          return astar_path(g, sc.starts[r], sc.goals[r], HeuristicKind::Manhattan);
        }
      });
    }
  }
  return paths;
}

}  // namespace ddm
