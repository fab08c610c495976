#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "ddm/error.hpp"
#include "ddm/rng.hpp"

namespace ddm {

// Grid coordinates are 1-based: i is the column (east = +i), j is the row
// (north = +j). Serialized files use 0-based coordinates.
struct Vertex {
  int i = 0;
  int j = 0;

  friend bool operator==(const Vertex& a, const Vertex& b) { return a.i == b.i && a.j == b.j; }
  friend bool operator!=(const Vertex& a, const Vertex& b) { return !(a == b); }
  friend bool operator<(const Vertex& a, const Vertex& b) {
    return a.j != b.j ? a.j < b.j : a.i < b.i;
  }
};

struct VertexHash {
  std::size_t operator()(const Vertex& v) const {
    return std::hash<std::uint64_t>()((static_cast<std::uint64_t>(v.i) << 32) |
                                      static_cast<std::uint32_t>(v.j));
  }
};

using Configuration = std::vector<Vertex>;
using Path = std::vector<Vertex>;

inline std::string to_string(const Vertex& v) {
  return "(" + std::to_string(v.i) + "," + std::to_string(v.j) + ")";
}

// 4-connected rectangular grid with static obstacles. Immutable once built.
class GridGraph {
 public:
  GridGraph(int width, int height, const std::vector<Vertex>& obstacles = {})
      : width_(width), height_(height) {
    if (width < 1 || height < 1)
      fail(ErrorCode::InvalidParameter, "grid dimensions must be positive");
    blocked_.assign(static_cast<std::size_t>(width) * height, 0);
    for (const Vertex& v : obstacles) {
      if (!in_bounds(v))
        fail(ErrorCode::InvalidVertex, "obstacle outside grid: " + ddm::to_string(v));
      blocked_[index(v)] = 1;
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }

  bool in_bounds(const Vertex& v) const {
    return v.i >= 1 && v.i <= width_ && v.j >= 1 && v.j <= height_;
  }

  bool blocked(const Vertex& v) const { return blocked_[index(v)] != 0; }

  // True iff v is a vertex of the graph (in bounds and not an obstacle).
  bool has_vertex(const Vertex& v) const { return in_bounds(v) && !blocked(v); }

  void require_vertex(const Vertex& v) const {
    if (!in_bounds(v)) fail(ErrorCode::InvalidVertex, "out of bounds: " + ddm::to_string(v));
    if (blocked(v)) fail(ErrorCode::InvalidVertex, "obstacle cell: " + ddm::to_string(v));
  }

  // Row-major cell index, usable for any in-bounds cell (free or blocked).
  std::size_t index(const Vertex& v) const {
    return static_cast<std::size_t>(v.j - 1) * width_ + (v.i - 1);
  }

  Vertex vertex_at(std::size_t index) const {
    return Vertex{static_cast<int>(index % width_) + 1, static_cast<int>(index / width_) + 1};
  }

  std::size_t cell_count() const { return blocked_.size(); }

  int num_vertices() const {
    return static_cast<int>(blocked_.size() - std::count(blocked_.begin(), blocked_.end(), 1));
  }

  int num_obstacles() const {
    return static_cast<int>(std::count(blocked_.begin(), blocked_.end(), 1));
  }

  // Free vertices in row-major order (j ascending, then i).
  std::vector<Vertex> vertices() const {
    std::vector<Vertex> out;
    out.reserve(blocked_.size());
    for (int j = 1; j <= height_; ++j)
      for (int i = 1; i <= width_; ++i)
        if (!blocked_[index({i, j})]) out.push_back({i, j});
    return out;
  }

  friend bool operator==(const GridGraph& a, const GridGraph& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.blocked_ == b.blocked_;
  }

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> blocked_;
};

// Neighbor order is fixed (E, W, N, S) so every scan over successors is
// deterministic. Returns the number of neighbors written to out.
inline int neighbors(const GridGraph& g, const Vertex& v, Vertex out[4]) {
  g.require_vertex(v);
  const Vertex cand[4] = {{v.i + 1, v.j}, {v.i - 1, v.j}, {v.i, v.j + 1}, {v.i, v.j - 1}};
  int n = 0;
  for (const Vertex& c : cand)
    if (g.has_vertex(c)) out[n++] = c;
  return n;
}

inline std::vector<Vertex> neighbors(const GridGraph& g, const Vertex& v) {
  Vertex buf[4];
  int n = neighbors(g, v, buf);
  return std::vector<Vertex>(buf, buf + n);
}

// BFS distances from src over free cells; -1 where unreachable or blocked.
inline std::vector<int> bfs_distances(const GridGraph& g, const Vertex& src) {
  g.require_vertex(src);
  std::vector<int> dist(g.cell_count(), -1);
  std::vector<std::size_t> queue;
  queue.reserve(g.cell_count());
  dist[g.index(src)] = 0;
  queue.push_back(g.index(src));
  for (std::size_t head = 0; head < queue.size(); ++head) {
    Vertex u = g.vertex_at(queue[head]);
    int du = dist[g.index(u)];
    Vertex buf[4];
    int n = neighbors(g, u, buf);
    for (int k = 0; k < n; ++k) {
      std::size_t idx = g.index(buf[k]);
      if (dist[idx] < 0) {
        dist[idx] = du + 1;
        queue.push_back(idx);
      }
    }
  }
  return dist;
}

inline bool is_connected(const GridGraph& g) {
  std::vector<Vertex> vs = g.vertices();
  if (vs.size() <= 1) return true;
  std::vector<int> dist = bfs_distances(g, vs[0]);
  for (const Vertex& v : vs)
    if (dist[g.index(v)] < 0) return false;
  return true;
}

// Scale every cell of g into a k×k block. Obstacle runs in the result have
// lengths that are multiples of k, which guarantees room for the conflict
// windows: k=2 leaves a free 2×3 around every free vertex, k=3 a free 3×3.
inline GridGraph expand_low_resolution(const GridGraph& g, int k) {
  if (k < 2) fail(ErrorCode::InvalidParameter, "expansion factor must be >= 2");
  std::vector<Vertex> obstacles;
  obstacles.reserve(static_cast<std::size_t>(g.num_obstacles()) * k * k);
  for (int j = 1; j <= g.height(); ++j)
    for (int i = 1; i <= g.width(); ++i)
      if (g.blocked({i, j}))
        for (int y = 0; y < k; ++y)
          for (int x = 0; x < k; ++x)
            obstacles.push_back({k * (i - 1) + 1 + x, k * (j - 1) + 1 + y});
  return GridGraph(g.width() * k, g.height() * k, obstacles);
}

// Warehouse floor: a rows×cols array of block_w×block_h obstacle blocks,
// separated by aisles and surrounded by a border one cell wider than the
// aisle on each axis. generate_warehouse(8, 8, 5, 2, 3, 2) gives the 69×36
// layout used by the large benchmarks.
inline GridGraph generate_warehouse(int rows, int cols, int block_w, int block_h, int aisle_x,
                                    int aisle_y) {
  if (rows < 1 || cols < 1) fail(ErrorCode::InvalidParameter, "need at least one block row/col");
  if (block_w < 1 || block_h < 1) fail(ErrorCode::InvalidParameter, "block dims must be positive");
  if (aisle_x < 1 || aisle_y < 1) fail(ErrorCode::InvalidParameter, "aisle width must be positive");
  int border_x = aisle_x + 1;
  int border_y = aisle_y + 1;
  int width = 2 * border_x + cols * block_w + (cols - 1) * aisle_x;
  int height = 2 * border_y + rows * block_h + (rows - 1) * aisle_y;
  std::vector<Vertex> obstacles;
  obstacles.reserve(static_cast<std::size_t>(rows) * cols * block_w * block_h);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      int x0 = border_x + c * (block_w + aisle_x) + 1;
      int y0 = border_y + r * (block_h + aisle_y) + 1;
      for (int y = 0; y < block_h; ++y)
        for (int x = 0; x < block_w; ++x) obstacles.push_back({x0 + x, y0 + y});
    }
  return GridGraph(width, height, obstacles);
}

inline GridGraph generate_warehouse(int rows, int cols, int block_w, int block_h, int aisle) {
  return generate_warehouse(rows, cols, block_w, block_h, aisle, aisle);
}

// Random base grid with floor(fraction * cells) obstacles, expanded by k.
// Resamples the obstacle set until the free space is connected.
inline GridGraph random_low_res_map(int base_w, int base_h, int k, double fraction,
                                    std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0)
    fail(ErrorCode::InvalidParameter, "obstacle fraction must be in [0,1)");
  std::size_t cells = static_cast<std::size_t>(base_w) * base_h;
  std::size_t want = static_cast<std::size_t>(fraction * static_cast<double>(cells));
  Rng rng(seed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<Vertex> all;
    all.reserve(cells);
    for (int j = 1; j <= base_h; ++j)
      for (int i = 1; i <= base_w; ++i) all.push_back({i, j});
    rng.partial_shuffle(all, want);
    std::vector<Vertex> obstacles(all.begin(), all.begin() + static_cast<long>(want));
    GridGraph base(base_w, base_h, obstacles);
    if (base.num_vertices() > 0 && is_connected(base)) return expand_low_resolution(base, k);
  }
  fail(ErrorCode::InvalidParameter, "could not sample a connected obstacle layout");
}

struct Scenario {
  GridGraph graph;
  Configuration starts;
  Configuration goals;
  std::uint64_t seed = 0;

  int num_robots() const { return static_cast<int>(starts.size()); }
};

namespace detail {

inline void require_distinct(const GridGraph& g, const Configuration& c, const char* what) {
  std::vector<std::size_t> idx;
  idx.reserve(c.size());
  for (const Vertex& v : c) {
    g.require_vertex(v);
    idx.push_back(g.index(v));
  }
  std::sort(idx.begin(), idx.end());
  if (std::adjacent_find(idx.begin(), idx.end()) != idx.end())
    fail(ErrorCode::InvalidParameter, std::string(what) + " are not pairwise distinct");
}

}  // namespace detail

inline Scenario make_scenario(const GridGraph& g, const Configuration& starts,
                              const Configuration& goals, std::uint64_t seed) {
  if (starts.empty()) fail(ErrorCode::InvalidParameter, "scenario needs at least one robot");
  if (starts.size() != goals.size())
    fail(ErrorCode::InvalidParameter, "starts and goals differ in size");
  detail::require_distinct(g, starts, "starts");
  detail::require_distinct(g, goals, "goals");
  // Reject start/goal pairs in different components up front.
  std::vector<int> comp(g.cell_count(), -1);
  int next_comp = 0;
  for (const Vertex& v : g.vertices()) {
    if (comp[g.index(v)] >= 0) continue;
    std::vector<int> dist = bfs_distances(g, v);
    for (std::size_t c = 0; c < dist.size(); ++c)
      if (dist[c] >= 0) comp[c] = next_comp;
    ++next_comp;
  }
  for (std::size_t r = 0; r < starts.size(); ++r)
    if (comp[g.index(starts[r])] != comp[g.index(goals[r])])
      fail(ErrorCode::NoPath, "goal unreachable for robot " + std::to_string(r));
  return Scenario{g, starts, goals, seed};
}

// Starts and goals each drawn uniformly without replacement from the free
// vertices; deterministic for a given seed.
inline Scenario random_scenario(const GridGraph& g, int n, std::uint64_t seed) {
  if (n < 1) fail(ErrorCode::InvalidParameter, "need at least one robot");
  std::vector<Vertex> pool = g.vertices();
  if (static_cast<std::size_t>(n) > pool.size())
    fail(ErrorCode::Capacity, "more robots than free vertices");
  Rng rng(seed);
  rng.partial_shuffle(pool, n);
  Configuration starts(pool.begin(), pool.begin() + n);
  std::vector<Vertex> pool2 = g.vertices();
  rng.partial_shuffle(pool2, n);
  Configuration goals(pool2.begin(), pool2.begin() + n);
  return make_scenario(g, starts, goals, seed);
}

// ---- file formats ----------------------------------------------------------
// Map: line 1 "width height", then height rows of '.'/'@'; file row 1 is j=1.
// Scenario: line 1 "n seed", then n lines "si sj gi gj", all 0-based.
// Trace: line 1 "n T", then T+1 lines of n "i j" pairs, 0-based.

namespace detail {

inline std::string read_text_line(std::istream& in, int& line_no, const char* what) {
  std::string line;
  if (!std::getline(in, line))
    fail(ErrorCode::Parse, std::string("line ") + std::to_string(line_no + 1) +
                               ": unexpected end of file, expected " + what);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

template <typename T>
inline T parse_number(std::istringstream& in, int line_no, const char* what) {
  T v;
  if (!(in >> v))
    fail(ErrorCode::Parse,
         std::string("line ") + std::to_string(line_no) + ": expected " + what);
  return v;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Parse, "cannot open for writing: " + path);
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Parse, "cannot open: " + path);
  return in;
}

}  // namespace detail

inline void save_map(const GridGraph& g, std::ostream& out) {
  out << g.width() << " " << g.height() << "\n";
  for (int j = 1; j <= g.height(); ++j) {
    for (int i = 1; i <= g.width(); ++i) out << (g.blocked({i, j}) ? '@' : '.');
    out << "\n";
  }
}

inline void save_map(const GridGraph& g, const std::string& path) {
  std::ofstream out = detail::open_out(path);
  save_map(g, out);
}

inline GridGraph load_map(std::istream& in) {
  int line_no = 0;
  std::istringstream header(detail::read_text_line(in, line_no, "map header"));
  int w = detail::parse_number<int>(header, line_no, "width");
  int h = detail::parse_number<int>(header, line_no, "height");
  if (w < 1 || h < 1)
    fail(ErrorCode::Parse, "line 1: map dimensions must be positive");
  std::vector<Vertex> obstacles;
  for (int j = 1; j <= h; ++j) {
    std::string row = detail::read_text_line(in, line_no, "map row");
    if (static_cast<int>(row.size()) != w)
      fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(w) + " characters, got " +
                                 std::to_string(row.size()));
    for (int i = 1; i <= w; ++i) {
      char c = row[i - 1];
      if (c == '@')
        obstacles.push_back({i, j});
      else if (c != '.')
        fail(ErrorCode::Parse,
             "line " + std::to_string(line_no) + ": bad cell character '" + c + "'");
    }
  }
  return GridGraph(w, h, obstacles);
}

inline GridGraph load_map(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  return load_map(in);
}

inline void save_scenario(const Scenario& sc, std::ostream& out) {
  out << sc.num_robots() << " " << sc.seed << "\n";
  for (int r = 0; r < sc.num_robots(); ++r)
    out << sc.starts[r].i - 1 << " " << sc.starts[r].j - 1 << " " << sc.goals[r].i - 1 << " "
        << sc.goals[r].j - 1 << "\n";
}

inline void save_scenario(const Scenario& sc, const std::string& path) {
  std::ofstream out = detail::open_out(path);
  save_scenario(sc, out);
}

inline Scenario load_scenario(const GridGraph& g, std::istream& in) {
  int line_no = 0;
  std::istringstream header(detail::read_text_line(in, line_no, "scenario header"));
  int n = detail::parse_number<int>(header, line_no, "robot count");
  std::uint64_t seed = detail::parse_number<std::uint64_t>(header, line_no, "seed");
  Configuration starts, goals;
  for (int r = 0; r < n; ++r) {
    std::istringstream row(detail::read_text_line(in, line_no, "scenario row"));
    int si = detail::parse_number<int>(row, line_no, "start i");
    int sj = detail::parse_number<int>(row, line_no, "start j");
    int gi = detail::parse_number<int>(row, line_no, "goal i");
    int gj = detail::parse_number<int>(row, line_no, "goal j");
    starts.push_back({si + 1, sj + 1});
    goals.push_back({gi + 1, gj + 1});
  }
  return make_scenario(g, starts, goals, seed);
}

inline Scenario load_scenario(const GridGraph& g, const std::string& path) {
  std::ifstream in = detail::open_in(path);
  return load_scenario(g, in);
}

inline void save_trace(const std::vector<Configuration>& trace, std::ostream& out) {
  if (trace.empty()) fail(ErrorCode::InvalidParameter, "trace has no timesteps");
  std::size_t n = trace[0].size();
  out << n << " " << trace.size() - 1 << "\n";
  for (const Configuration& cfg : trace) {
    if (cfg.size() != n) fail(ErrorCode::InvalidParameter, "trace rows differ in robot count");
    for (std::size_t r = 0; r < n; ++r) {
      if (r) out << " ";
      out << cfg[r].i - 1 << " " << cfg[r].j - 1;
    }
    out << "\n";
  }
}

inline void save_trace(const std::vector<Configuration>& trace, const std::string& path) {
  std::ofstream out = detail::open_out(path);
  save_trace(trace, out);
}

inline std::vector<Configuration> load_trace(std::istream& in) {
  int line_no = 0;
  std::istringstream header(detail::read_text_line(in, line_no, "trace header"));
  int n = detail::parse_number<int>(header, line_no, "robot count");
  long T = detail::parse_number<long>(header, line_no, "makespan");
  if (n < 1 || T < 0) fail(ErrorCode::Parse, "line 1: bad trace header");
  std::vector<Configuration> trace;
  for (long t = 0; t <= T; ++t) {
    std::istringstream row(detail::read_text_line(in, line_no, "trace row"));
    Configuration cfg;
    for (int r = 0; r < n; ++r) {
      int i = detail::parse_number<int>(row, line_no, "i coordinate");
      int j = detail::parse_number<int>(row, line_no, "j coordinate");
      cfg.push_back({i + 1, j + 1});
    }
    trace.push_back(std::move(cfg));
  }
  return trace;
}

inline std::vector<Configuration> load_trace(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  return load_trace(in);
}

}  // namespace ddm
