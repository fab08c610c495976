#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "ddm/error.hpp"
#include "ddm/rng.hpp"

namespace ddm {

// The conflict-window sub-grids. Cell ids are row-major from the bottom-left
// corner; the 2x3 canonical orientation is 3 cells wide, 2 tall.
enum class SmallShape : std::uint8_t { S2x3, S3x3 };

constexpr int shape_cells(SmallShape s) { return s == SmallShape::S2x3 ? 6 : 9; }
constexpr int shape_width(SmallShape) { return 3; }
constexpr int shape_height(SmallShape s) { return s == SmallShape::S2x3 ? 2 : 3; }

inline const char* shape_name(SmallShape s) { return s == SmallShape::S2x3 ? "2x3" : "3x3"; }

inline SmallShape parse_shape(const std::string& text) {
  if (text == "2x3") return SmallShape::S2x3;
  if (text == "3x3") return SmallShape::S3x3;
  fail(ErrorCode::InvalidParameter, "unknown shape: " + text);
}

// Ordered tuple of distinct cell ids; position carries robot identity.
using SmallConfig = std::vector<std::uint8_t>;

struct SmallSolution {
  std::vector<SmallConfig> steps;

  int makespan() const { return static_cast<int>(steps.size()) - 1; }
};

inline void validate_config(SmallShape shape, const SmallConfig& c) {
  if (c.empty() || static_cast<int>(c.size()) > shape_cells(shape))
    fail(ErrorCode::InvalidParameter, "config size out of range");
  std::uint16_t seen = 0;
  for (std::uint8_t cell : c) {
    if (cell >= shape_cells(shape))
      fail(ErrorCode::InvalidParameter, "cell id out of range: " + std::to_string(cell));
    if (seen & (1u << cell)) fail(ErrorCode::InvalidParameter, "repeated cell id");
    seen |= 1u << cell;
  }
}

// ---- dihedral group ---------------------------------------------------------
// An action applies the flip (across the vertical mid-line) first, then `rot`
// clockwise quarter turns, matching the composite names 1, r, r2, r3, f, fr,
// fr2, fr3. On the 2x3 shape odd rotations change the footprint and are
// rejected; its symmetry group is {1, r2, f, fr2}.

struct GroupAction {
  std::uint8_t rot = 0;  // clockwise quarter turns, 0..3
  bool flip = false;

  friend bool operator==(const GroupAction& a, const GroupAction& b) {
    return a.rot == b.rot && a.flip == b.flip;
  }
};

inline constexpr GroupAction kActions3x3[8] = {
    {0, false}, {1, false}, {2, false}, {3, false},
    {0, true},  {1, true},  {2, true},  {3, true},
};

inline constexpr GroupAction kActions2x3[4] = {{0, false}, {2, false}, {0, true}, {2, true}};

inline std::string action_name(const GroupAction& a) {
  std::string name = a.flip ? "f" : "";
  if (a.rot == 1) name += "r";
  else if (a.rot == 2) name += "r2";
  else if (a.rot == 3) name += "r3";
  return name.empty() ? "1" : name;
}

inline GroupAction compose(const GroupAction& a, const GroupAction& b) {
  // apply(compose(a,b), c) == apply(a, apply(b, c)); uses f r^k = r^-k f.
  std::uint8_t rot = static_cast<std::uint8_t>((a.rot + (a.flip ? (4 - b.rot) % 4 : b.rot)) % 4);
  return {rot, a.flip != b.flip};
}

inline GroupAction inverse(const GroupAction& a) {
  return {static_cast<std::uint8_t>(a.flip ? a.rot : (4 - a.rot) % 4), a.flip};
}

inline std::uint8_t transform_cell(SmallShape shape, const GroupAction& a, std::uint8_t cell) {
  int w = shape_width(shape), h = shape_height(shape);
  int x = cell % w, y = cell / w;
  if (a.flip) x = w - 1 - x;
  int rot = a.rot;
  if (shape == SmallShape::S2x3) {
    if (rot % 2 != 0)
      fail(ErrorCode::InvalidAction, "90-degree rotation not applicable to 2x3");
    if (rot == 2) {
      x = w - 1 - x;
      y = h - 1 - y;
    }
  } else {
    for (int k = 0; k < rot; ++k) {
      int nx = y, ny = w - 1 - x;  // clockwise quarter turn of the 3x3 square
      x = nx;
      y = ny;
    }
  }
  return static_cast<std::uint8_t>(y * w + x);
}

inline SmallConfig apply_group_action(const GroupAction& a, const SmallConfig& c,
                                      SmallShape shape) {
  SmallConfig out(c.size());
  for (std::size_t k = 0; k < c.size(); ++k) out[k] = transform_cell(shape, a, c[k]);
  return out;
}

// ---- canonical form ---------------------------------------------------------

struct Canonical {
  std::vector<std::uint8_t> perm;  // sorted_xi[k] == xi[perm[k]]
  SmallConfig sorted_xi;
  SmallConfig permuted_xg;
};

inline Canonical canonicalize(const SmallConfig& xi, const SmallConfig& xg) {
  if (xi.size() != xg.size())
    fail(ErrorCode::InvalidParameter, "initial and goal configs differ in size");
  Canonical out;
  out.perm.resize(xi.size());
  std::iota(out.perm.begin(), out.perm.end(), 0);
  std::sort(out.perm.begin(), out.perm.end(),
            [&](std::uint8_t a, std::uint8_t b) { return xi[a] < xi[b]; });
  out.sorted_xi.resize(xi.size());
  out.permuted_xg.resize(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) {
    out.sorted_xi[k] = xi[out.perm[k]];
    out.permuted_xg[k] = xg[out.perm[k]];
  }
  return out;
}

// ---- string encoding --------------------------------------------------------

inline std::string encode_config(const SmallConfig& c) {
  std::string s(c.size(), '0');
  for (std::size_t k = 0; k < c.size(); ++k) s[k] = static_cast<char>('0' + c[k]);
  return s;
}

inline SmallConfig decode_config(const std::string& s) {
  SmallConfig c(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] < '0' || s[k] > '8') fail(ErrorCode::Parse, "bad cell digit in: " + s);
    c[k] = static_cast<std::uint8_t>(s[k] - '0');
  }
  return c;
}

inline std::string make_key(const SmallConfig& sorted_xi, const SmallConfig& xg) {
  return encode_config(sorted_xi) + " " + encode_config(xg);
}

inline std::string encode_solution(const SmallSolution& sol) {
  std::string out;
  for (std::size_t t = 0; t < sol.steps.size(); ++t) {
    if (t) out += ' ';
    out += encode_config(sol.steps[t]);
  }
  return out;
}

inline SmallSolution decode_solution(const std::string& value) {
  SmallSolution sol;
  std::size_t pos = 0;
  while (pos < value.size()) {
    std::size_t end = value.find(' ', pos);
    if (end == std::string::npos) end = value.size();
    sol.steps.push_back(decode_config(value.substr(pos, end - pos)));
    pos = end + 1;
  }
  if (sol.steps.empty()) fail(ErrorCode::Parse, "empty solution value");
  return sol;
}

// ---- legality ---------------------------------------------------------------

namespace detail {

inline const std::vector<std::vector<std::uint8_t>>& small_adjacency(SmallShape shape) {
  static const auto build = [](SmallShape s) {
    int w = shape_width(s), h = shape_height(s);
    std::vector<std::vector<std::uint8_t>> adj(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        std::vector<std::uint8_t>& out = adj[static_cast<std::size_t>(y) * w + x];
        const int d[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (const auto& dv : d) {
          int nx = x + dv[0], ny = y + dv[1];
          if (nx >= 0 && nx < w && ny >= 0 && ny < h)
            out.push_back(static_cast<std::uint8_t>(ny * w + nx));
        }
        std::sort(out.begin(), out.end());
      }
    return adj;
  };
  static const std::vector<std::vector<std::uint8_t>> adj2 = build(SmallShape::S2x3);
  static const std::vector<std::vector<std::uint8_t>> adj3 = build(SmallShape::S3x3);
  return shape == SmallShape::S2x3 ? adj2 : adj3;
}

inline bool small_adjacent(SmallShape shape, std::uint8_t a, std::uint8_t b) {
  int w = shape_width(shape);
  int dx = std::abs(a % w - b % w), dy = std::abs(a / w - b / w);
  return dx + dy == 1;
}

}  // namespace detail

// One synchronous move of all robots: stay or step to a neighbor, pairwise
// distinct targets, no head-to-head edge swap.
inline bool legal_transition(SmallShape shape, const SmallConfig& from, const SmallConfig& to) {
  if (from.size() != to.size()) return false;
  for (std::size_t k = 0; k < from.size(); ++k)
    if (from[k] != to[k] && !detail::small_adjacent(shape, from[k], to[k])) return false;
  for (std::size_t a = 0; a < from.size(); ++a)
    for (std::size_t b = a + 1; b < from.size(); ++b) {
      if (to[a] == to[b]) return false;
      if (to[a] == from[b] && to[b] == from[a] && from[a] != from[b] && to[a] != from[a])
        return false;  // swap along an edge
    }
  return true;
}

inline bool solution_legal(SmallShape shape, const SmallSolution& sol) {
  if (sol.steps.empty()) return false;
  for (const SmallConfig& c : sol.steps) validate_config(shape, c);
  for (std::size_t t = 1; t < sol.steps.size(); ++t)
    if (!legal_transition(shape, sol.steps[t - 1], sol.steps[t])) return false;
  return true;
}

// ---- joint configuration space ---------------------------------------------
// Ordered configurations of n robots on m cells, ranked by the falling
// factorial (Lehmer) code so BFS can use flat arrays.

class JointSpace {
 public:
  JointSpace(SmallShape shape, int n)
      : shape_(shape), n_(n), m_(shape_cells(shape)) {
    if (n < 1 || n > m_) fail(ErrorCode::InvalidParameter, "robot count out of range");
    count_ = 1;
    for (int k = 0; k < n_; ++k) count_ *= static_cast<std::uint32_t>(m_ - k);
  }

  SmallShape shape() const { return shape_; }
  int robots() const { return n_; }
  std::uint32_t count() const { return count_; }

  std::uint32_t rank(const SmallConfig& c) const {
    std::uint32_t r = 0;
    std::uint16_t used = 0;
    for (int k = 0; k < n_; ++k) {
      std::uint32_t smaller = 0;
      for (int cell = 0; cell < c[k]; ++cell)
        if (!(used & (1u << cell))) ++smaller;
      r = r * static_cast<std::uint32_t>(m_ - k) + smaller;
      used |= 1u << c[k];
    }
    return r;
  }

  SmallConfig unrank(std::uint32_t r) const {
    SmallConfig c(static_cast<std::size_t>(n_));
    std::uint32_t radix = count_;
    std::uint16_t used = 0;
    for (int k = 0; k < n_; ++k) {
      radix /= static_cast<std::uint32_t>(m_ - k);
      std::uint32_t digit = r / radix;
      r %= radix;
      for (int cell = 0;; ++cell) {
        if (used & (1u << cell)) continue;
        if (digit == 0) {
          c[k] = static_cast<std::uint8_t>(cell);
          used |= 1u << cell;
          break;
        }
        --digit;
      }
    }
    return c;
  }

  // Enumerates legal successor configurations in lexicographic tuple order
  // (the identity move included). fn receives the successor tuple.
  template <typename Fn>
  void for_each_successor(const SmallConfig& from, Fn&& fn) const {
    SmallConfig to(from.size());
    descend(from, to, 0, 0, fn);
  }

 private:
  template <typename Fn>
  void descend(const SmallConfig& from, SmallConfig& to, std::size_t k, std::uint16_t used,
               Fn& fn) const {
    if (k == from.size()) {
      fn(const_cast<const SmallConfig&>(to));
      return;
    }
    const std::vector<std::uint8_t>& adj = detail::small_adjacency(shape_)[from[k]];
    // candidate targets ascending: neighbors below the stay cell, the stay
    // cell, neighbors above it (adjacency lists are sorted)
    std::size_t split = 0;
    while (split < adj.size() && adj[split] < from[k]) ++split;
    auto try_cell = [&](std::uint8_t cell) {
      if (used & (1u << cell)) return;
      for (std::size_t e = 0; e < k; ++e)
        if (to[e] == from[k] && cell == from[e] && from[e] != from[k]) return;  // swap
      to[k] = cell;
      descend(from, to, k + 1, static_cast<std::uint16_t>(used | (1u << cell)), fn);
    };
    for (std::size_t a = 0; a < split; ++a) try_cell(adj[a]);
    try_cell(from[k]);
    for (std::size_t a = split; a < adj.size(); ++a) try_cell(adj[a]);
  }

  SmallShape shape_;
  int n_;
  int m_;
  std::uint32_t count_;
};

namespace detail {

// Backward BFS from the goal over the joint space; dist is indexed by rank.
inline std::vector<std::uint8_t> joint_bfs(const JointSpace& js, std::uint32_t goal_rank) {
  std::vector<std::uint8_t> dist(js.count(), 0xFF);
  std::vector<std::uint32_t> queue;
  queue.reserve(js.count());
  dist[goal_rank] = 0;
  queue.push_back(goal_rank);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    std::uint32_t cur = queue[head];
    std::uint8_t d = dist[cur];
    js.for_each_successor(js.unrank(cur), [&](const SmallConfig& next) {
      std::uint32_t nr = js.rank(next);
      if (dist[nr] == 0xFF) {
        dist[nr] = static_cast<std::uint8_t>(d + 1);
        queue.push_back(nr);
      }
    });
  }
  return dist;
}

// Greedy forward extraction: repeatedly take the lexicographically smallest
// successor one step closer to the goal.
inline SmallSolution extract_solution(const JointSpace& js, const SmallConfig& xi,
                                      const std::vector<std::uint8_t>& dist) {
  std::uint32_t cur_rank = js.rank(xi);
  if (dist[cur_rank] == 0xFF)
    fail(ErrorCode::NoPath, "joint instance infeasible (should not happen on these grids)");
  SmallSolution sol;
  sol.steps.push_back(xi);
  SmallConfig cur = xi;
  int remaining = dist[cur_rank];
  while (remaining > 0) {
    SmallConfig chosen;
    bool found = false;
    js.for_each_successor(cur, [&](const SmallConfig& next) {
      if (found) return;
      if (dist[js.rank(next)] == remaining - 1) {
        chosen = next;
        found = true;
      }
    });
    if (!found) fail(ErrorCode::DatabaseIntegrity, "BFS policy extraction failed");
    sol.steps.push_back(chosen);
    cur = std::move(chosen);
    --remaining;
  }
  return sol;
}

}  // namespace detail

// Min-makespan solution by breadth-first search over the joint configuration
// space, ties broken by lexicographically smallest successor configuration.
inline SmallSolution oracle_solve(SmallShape shape, const SmallConfig& xi,
                                  const SmallConfig& xg) {
  validate_config(shape, xi);
  validate_config(shape, xg);
  if (xi.size() != xg.size())
    fail(ErrorCode::InvalidParameter, "initial and goal configs differ in size");
  if (xi == xg) return SmallSolution{{xi}};
  JointSpace js(shape, static_cast<int>(xi.size()));
  std::vector<std::uint8_t> dist = detail::joint_bfs(js, js.rank(xg));
  return detail::extract_solution(js, xi, dist);
}

// ---- database ---------------------------------------------------------------

enum class BuildMode { Full, Lazy };

struct BuildOptions {
  int n_max = 0;                 // 0 = all robot counts the shape supports
  BuildMode mode = BuildMode::Full;
  bool lazy_fallback = true;     // full mode: memoized oracle beyond n_max
  int threads = 1;
  std::size_t max_entries = 0;   // 0 = unlimited; exceeded -> checkpoint + error
  std::string checkpoint_path;   // where the partial store goes on abort
};

class SolutionDatabase {
 public:
  SmallShape shape() const { return shape_; }
  int n_max_full() const { return n_max_full_; }
  bool lazy_fallback() const { return lazy_fallback_; }
  std::size_t size() const { return entries_.size(); }

  bool contains_key(const std::string& key) const { return entries_.count(key) != 0; }

  const std::string* raw_value(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  SmallSolution lookup(const SmallConfig& xi, const SmallConfig& xg) const {
    validate_config(shape_, xi);
    validate_config(shape_, xg);
    Canonical canon = canonicalize(xi, xg);
    std::string key = make_key(canon.sorted_xi, canon.permuted_xg);
    std::string value;
    int n = static_cast<int>(xi.size());
    if (n <= n_max_full_) {
      auto it = entries_.find(key);
      if (it == entries_.end())
        fail(ErrorCode::DatabaseIntegrity, "missing entry for key " + key);
      value = it->second;
    } else if (!lazy_fallback_) {
      fail(ErrorCode::DatabaseIntegrity,
           "database covers n <= " + std::to_string(n_max_full_) + ", got n = " +
               std::to_string(n));
    } else {
      value = memo_lookup(key, canon);
    }
    SmallSolution canonical_sol = decode_solution(value);
    if (canonical_sol.steps.front() != canon.sorted_xi ||
        canonical_sol.steps.back() != canon.permuted_xg)
      fail(ErrorCode::DatabaseIntegrity, "corrupt entry for key " + key);
    // undo the sorting permutation to recover the caller's robot order
    SmallSolution sol;
    sol.steps.assign(canonical_sol.steps.size(), SmallConfig(xi.size()));
    for (std::size_t t = 0; t < sol.steps.size(); ++t)
      for (std::size_t k = 0; k < xi.size(); ++k)
        sol.steps[t][canon.perm[k]] = canonical_sol.steps[t][k];
    return sol;
  }

  int lookup_makespan(const SmallConfig& xi, const SmallConfig& xg) const {
    return lookup(xi, xg).makespan();
  }

  static SolutionDatabase build(SmallShape shape, const BuildOptions& options);
  void save(const std::string& path) const;
  static SolutionDatabase load(const std::string& path);

 private:
  struct Memo {
    mutable std::shared_mutex mutex;
    mutable std::unordered_map<std::string, std::string> table;
  };

  std::string memo_lookup(const std::string& key, const Canonical& canon) const {
    {
      std::shared_lock lock(memo_->mutex);
      auto it = memo_->table.find(key);
      if (it != memo_->table.end()) return it->second;
    }
    std::string value =
        encode_solution(oracle_solve(shape_, canon.sorted_xi, canon.permuted_xg));
    std::unique_lock lock(memo_->mutex);
    return memo_->table.try_emplace(key, std::move(value)).first->second;
  }

  SmallShape shape_ = SmallShape::S2x3;
  int n_max_full_ = 0;
  bool lazy_fallback_ = true;
  std::unordered_map<std::string, std::string> entries_;
  std::shared_ptr<Memo> memo_ = std::make_shared<Memo>();
};

namespace detail {

// Joint adjacency in compressed sparse rows, successor lists in lex order;
// shared by every BFS at the same robot count.
struct JointAdjacency {
  std::vector<std::uint64_t> offsets;
  std::vector<std::uint32_t> targets;

  explicit JointAdjacency(const JointSpace& js) {
    offsets.reserve(js.count() + 1);
    offsets.push_back(0);
    for (std::uint32_t r = 0; r < js.count(); ++r) {
      js.for_each_successor(js.unrank(r),
                            [&](const SmallConfig& next) { targets.push_back(js.rank(next)); });
      offsets.push_back(targets.size());
    }
  }
};

inline std::vector<std::uint8_t> joint_bfs_csr(const JointAdjacency& adj, std::uint32_t count,
                                               std::uint32_t goal_rank) {
  std::vector<std::uint8_t> dist(count, 0xFF);
  std::vector<std::uint32_t> queue;
  queue.reserve(count);
  dist[goal_rank] = 0;
  queue.push_back(goal_rank);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    std::uint32_t cur = queue[head];
    std::uint8_t d = dist[cur];
    for (std::uint64_t e = adj.offsets[cur]; e < adj.offsets[cur + 1]; ++e) {
      std::uint32_t nr = adj.targets[e];
      if (dist[nr] == 0xFF) {
        dist[nr] = static_cast<std::uint8_t>(d + 1);
        queue.push_back(nr);
      }
    }
  }
  return dist;
}

inline SmallSolution extract_solution_csr(const JointSpace& js, const JointAdjacency& adj,
                                          const SmallConfig& xi,
                                          const std::vector<std::uint8_t>& dist) {
  std::uint32_t cur = js.rank(xi);
  if (dist[cur] == 0xFF)
    fail(ErrorCode::NoPath, "joint instance infeasible (should not happen on these grids)");
  SmallSolution sol;
  sol.steps.push_back(xi);
  int remaining = dist[cur];
  while (remaining > 0) {
    bool found = false;
    for (std::uint64_t e = adj.offsets[cur]; e < adj.offsets[cur + 1]; ++e) {
      std::uint32_t nr = adj.targets[e];
      if (dist[nr] == remaining - 1) {
        cur = nr;
        sol.steps.push_back(js.unrank(nr));
        found = true;
        break;
      }
    }
    if (!found) fail(ErrorCode::DatabaseIntegrity, "BFS policy extraction failed");
    --remaining;
  }
  return sol;
}

// All sorted n-subsets of the m cells, lexicographic.
inline std::vector<SmallConfig> sorted_subsets(int m, int n) {
  std::vector<SmallConfig> out;
  SmallConfig cur(static_cast<std::size_t>(n));
  std::function<void(int, int)> rec = [&](int start, int k) {
    if (k == n) {
      out.push_back(cur);
      return;
    }
    for (int cell = start; cell <= m - (n - k); ++cell) {
      cur[k] = static_cast<std::uint8_t>(cell);
      rec(cell + 1, k + 1);
    }
  };
  rec(0, 0);
  return out;
}

}  // namespace detail

inline SolutionDatabase SolutionDatabase::build(SmallShape shape, const BuildOptions& options) {
  SolutionDatabase db;
  db.shape_ = shape;
  db.lazy_fallback_ = options.lazy_fallback;
  int n_cap = shape_cells(shape);
  int n_max = options.n_max == 0 ? n_cap : options.n_max;
  if (n_max < 1 || n_max > n_cap)
    fail(ErrorCode::InvalidParameter, "n_max out of range for shape");
  if (options.mode == BuildMode::Lazy) {
    db.n_max_full_ = 0;
    db.lazy_fallback_ = true;
    return db;
  }

  const GroupAction* actions = shape == SmallShape::S2x3 ? kActions2x3 : kActions3x3;
  const int action_count = shape == SmallShape::S2x3 ? 4 : 8;
  int threads = std::max(1, options.threads);

  auto over_budget = [&]() {
    return options.max_entries != 0 && db.entries_.size() > options.max_entries;
  };

  for (int n = 1; n <= n_max; ++n) {
    JointSpace js(shape, n);
    detail::JointAdjacency adj(js);
    std::vector<SmallConfig> subsets = detail::sorted_subsets(shape_cells(shape), n);
    std::vector<std::uint32_t> subset_ranks(subsets.size());
    for (std::size_t s = 0; s < subsets.size(); ++s) subset_ranks[s] = js.rank(subsets[s]);

    // Transports from one solved instance: the solution itself, its reversal,
    // and every group image of both; inserted before any further solving.
    auto transport = [&](const SmallConfig& xi, const SmallConfig& xg,
                         const std::vector<SmallConfig>& steps) {
      for (int rev = 0; rev < 2; ++rev)
        for (int a = 0; a < action_count; ++a) {
          SmallConfig ti = apply_group_action(actions[a], rev ? xg : xi, shape);
          SmallConfig tg = apply_group_action(actions[a], rev ? xi : xg, shape);
          Canonical canon = canonicalize(ti, tg);
          std::string key = make_key(canon.sorted_xi, canon.permuted_xg);
          if (db.entries_.count(key)) continue;
          std::string value;
          value.reserve(steps.size() * (xi.size() + 1));
          for (std::size_t t = 0; t < steps.size(); ++t) {
            const SmallConfig& src = rev ? steps[steps.size() - 1 - t] : steps[t];
            if (t) value += ' ';
            for (std::size_t k = 0; k < src.size(); ++k)
              value += static_cast<char>(
                  '0' + transform_cell(shape, actions[a], src[canon.perm[k]]));
          }
          db.entries_.emplace(std::move(key), std::move(value));
        }
    };

    // Goals are processed in rank order, in chunks: a chunk decides up front
    // which goals still need a BFS (based on entries merged so far), runs
    // those BFS in parallel, then harvests sequentially. Results do not
    // depend on the thread count.
    std::uint32_t chunk = static_cast<std::uint32_t>(std::max(1, threads * 4));
    for (std::uint32_t base = 0; base < js.count(); base += chunk) {
      std::uint32_t end = std::min(js.count(), base + chunk);
      std::vector<std::uint32_t> needed;
      for (std::uint32_t goal = base; goal < end; ++goal) {
        SmallConfig xg = js.unrank(goal);
        bool complete = true;
        for (const SmallConfig& s : subsets)
          if (!db.entries_.count(make_key(s, xg))) {
            complete = false;
            break;
          }
        if (!complete) needed.push_back(goal);
      }
      if (needed.empty()) continue;

      std::vector<std::vector<std::uint8_t>> dists(needed.size());
      if (threads == 1 || needed.size() == 1) {
        for (std::size_t w = 0; w < needed.size(); ++w)
          dists[w] = detail::joint_bfs_csr(adj, js.count(), needed[w]);
      } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        int workers = std::min<std::size_t>(threads, needed.size());
        for (int w = 0; w < workers; ++w)
          pool.emplace_back([&] {
            for (;;) {
              std::size_t idx = next.fetch_add(1);
              if (idx >= needed.size()) return;
              dists[idx] = detail::joint_bfs_csr(adj, js.count(), needed[idx]);
            }
          });
        for (std::thread& th : pool) th.join();
      }

      for (std::size_t w = 0; w < needed.size(); ++w) {
        SmallConfig xg = js.unrank(needed[w]);
        const std::vector<std::uint8_t>& dist = dists[w];
        for (std::size_t s = 0; s < subsets.size(); ++s) {
          std::string key = make_key(subsets[s], xg);
          if (db.entries_.count(key)) continue;
          SmallSolution sol = detail::extract_solution_csr(js, adj, subsets[s], dist);
          db.entries_.emplace(std::move(key), encode_solution(sol));
          transport(subsets[s], xg, sol.steps);
        }
        if (over_budget()) {
          // keep only fully completed robot counts in the checkpoint
          db.n_max_full_ = n - 1;
          std::erase_if(db.entries_, [&](const auto& kv) {
            return kv.first.find(' ') > static_cast<std::size_t>(n - 1);
          });
          if (!options.checkpoint_path.empty()) db.save(options.checkpoint_path);
          fail(ErrorCode::ResourceBudget,
               "entry cap " + std::to_string(options.max_entries) + " exceeded at n = " +
                   std::to_string(n) + (options.checkpoint_path.empty()
                                            ? ""
                                            : ", checkpoint: " + options.checkpoint_path));
        }
      }
    }
    db.n_max_full_ = n;
  }
  return db;
}

inline void SolutionDatabase::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Parse, "cannot open for writing: " + path);
  std::vector<const std::pair<const std::string, std::string>*> rows;
  rows.reserve(entries_.size());
  for (const auto& kv : entries_) rows.push_back(&kv);
  std::sort(rows.begin(), rows.end(),
            [](const auto* a, const auto* b) { return a->first < b->first; });

  std::ostringstream header;
  header << "ddmdb 1\n"
         << "shape " << shape_name(shape_) << "\n"
         << "nmax " << n_max_full_ << "\n"
         << "fallback " << (lazy_fallback_ ? 1 : 0) << "\n"
         << "entries " << rows.size() << "\n"
         << "index\n";
  std::string head = header.str();
  std::uint64_t data_start = head.size() + 8ull * rows.size();

  out << head;
  std::uint64_t offset = data_start;
  for (const auto* row : rows) {
    std::uint64_t le = offset;
    char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((le >> (8 * b)) & 0xFF);
    out.write(bytes, 8);
    offset += row->first.size() + row->second.size() + 2;  // "key value\n"
  }
  for (const auto* row : rows) out << row->first << " " << row->second << "\n";
  if (!out) fail(ErrorCode::Parse, "write failed: " + path);
}

namespace detail {

struct DbHeader {
  SmallShape shape;
  int n_max;
  bool fallback;
  std::uint64_t entries;
  std::uint64_t index_start;
};

inline DbHeader read_db_header(std::istream& in, const std::string& path) {
  DbHeader h{};
  std::string word, value;
  auto expect = [&](const char* tag) {
    if (!(in >> word) || word != tag)
      fail(ErrorCode::Parse, path + ": bad database header near '" + word + "'");
  };
  expect("ddmdb");
  std::uint64_t version;
  in >> version;
  if (version != 1) fail(ErrorCode::Parse, path + ": unsupported database version");
  expect("shape");
  in >> value;
  h.shape = parse_shape(value);
  expect("nmax");
  in >> h.n_max;
  expect("fallback");
  int fb;
  in >> fb;
  h.fallback = fb != 0;
  expect("entries");
  in >> h.entries;
  expect("index");
  in.get();  // newline before the binary index
  if (!in) fail(ErrorCode::Parse, path + ": truncated database header");
  h.index_start = static_cast<std::uint64_t>(in.tellg());
  return h;
}

}  // namespace detail

inline SolutionDatabase SolutionDatabase::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Parse, "cannot open: " + path);
  detail::DbHeader h = detail::read_db_header(in, path);
  SolutionDatabase db;
  db.shape_ = h.shape;
  db.n_max_full_ = h.n_max;
  db.lazy_fallback_ = h.fallback;
  in.seekg(static_cast<std::streamoff>(h.index_start + 8 * h.entries));
  db.entries_.reserve(h.entries);
  std::string line;
  for (std::uint64_t k = 0; k < h.entries; ++k) {
    if (!std::getline(in, line))
      fail(ErrorCode::Parse, path + ": truncated database body");
    std::size_t sep = line.find(' ');
    sep = line.find(' ', sep + 1);  // keys contain one space themselves
    if (sep == std::string::npos)
      fail(ErrorCode::Parse, path + ": malformed entry line");
    db.entries_.emplace(line.substr(0, sep), line.substr(sep + 1));
  }
  return db;
}

// Cold reader: binary-searches the on-disk index without loading the store.
class ColdDatabase {
 public:
  explicit ColdDatabase(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) fail(ErrorCode::Parse, "cannot open: " + path);
    header_ = detail::read_db_header(in_, path);
  }

  SmallShape shape() const { return header_.shape; }
  int n_max_full() const { return header_.n_max; }
  std::uint64_t size() const { return header_.entries; }

  SmallSolution lookup(const SmallConfig& xi, const SmallConfig& xg) {
    validate_config(header_.shape, xi);
    validate_config(header_.shape, xg);
    Canonical canon = canonicalize(xi, xg);
    std::string key = make_key(canon.sorted_xi, canon.permuted_xg);
    std::uint64_t lo = 0, hi = header_.entries;
    while (lo < hi) {
      std::uint64_t mid = lo + (hi - lo) / 2;
      std::string line = line_at(mid);
      std::size_t sep = line.find(' ');
      sep = line.find(' ', sep + 1);
      std::string mid_key = line.substr(0, sep);
      if (mid_key == key) {
        SmallSolution canonical_sol = decode_solution(line.substr(sep + 1));
        SmallSolution sol;
        sol.steps.assign(canonical_sol.steps.size(), SmallConfig(xi.size()));
        for (std::size_t t = 0; t < sol.steps.size(); ++t)
          for (std::size_t k = 0; k < xi.size(); ++k)
            sol.steps[t][canon.perm[k]] = canonical_sol.steps[t][k];
        return sol;
      }
      if (mid_key < key)
        lo = mid + 1;
      else
        hi = mid;
    }
    fail(ErrorCode::DatabaseIntegrity, "missing entry for key " + key);
  }

 private:
  std::string line_at(std::uint64_t row) {
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(header_.index_start + 8 * row));
    char bytes[8];
    in_.read(bytes, 8);
    std::uint64_t offset = 0;
    for (int b = 7; b >= 0; --b)
      offset = (offset << 8) | static_cast<std::uint8_t>(bytes[b]);
    in_.seekg(static_cast<std::streamoff>(offset));
    std::string line;
    if (!std::getline(in_, line)) fail(ErrorCode::Parse, path_ + ": bad index entry");
    return line;
  }

  std::ifstream in_;
  std::string path_;
  detail::DbHeader header_;
};

struct VerifyReport {
  int checked = 0;
  int mismatches = 0;
};

// Cross-checks random instances against a fresh oracle solve.
inline VerifyReport verify_database(const SolutionDatabase& db, int samples, std::uint64_t seed) {
  VerifyReport report;
  Rng rng(seed);
  int m = shape_cells(db.shape());
  int n_hi = db.lazy_fallback() ? m : std::max(1, db.n_max_full());
  for (int k = 0; k < samples; ++k) {
    int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_hi)));
    std::vector<std::uint8_t> cells(static_cast<std::size_t>(m));
    std::iota(cells.begin(), cells.end(), 0);
    rng.shuffle(cells);
    SmallConfig xi(cells.begin(), cells.begin() + n);
    rng.shuffle(cells);
    SmallConfig xg(cells.begin(), cells.begin() + n);
    SmallSolution got = db.lookup(xi, xg);
    SmallSolution want = oracle_solve(db.shape(), xi, xg);
    ++report.checked;
    if (got.makespan() != want.makespan() || !solution_legal(db.shape(), got) ||
        got.steps.front() != xi || got.steps.back() != xg)
      ++report.mismatches;
  }
  return report;
}

}  // namespace ddm
