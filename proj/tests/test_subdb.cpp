#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <map>
#include <set>
#include <thread>

#include "ddm/subdb.hpp"
#include "helpers.hpp"

using ddm::SmallConfig;
using ddm::SmallShape;
using ddm::SmallSolution;

namespace {

// Independent min-makespan oracle: map-based BFS with successors generated by
// an odometer over per-robot candidate moves. Shares no code with the library
// beyond the shape geometry.
std::vector<SmallConfig> naive_successors(SmallShape shape, const SmallConfig& from) {
  int w = 3, h = shape == SmallShape::S2x3 ? 2 : 3;
  std::vector<std::vector<int>> cand(from.size());
  for (std::size_t r = 0; r < from.size(); ++r) {
    int x = from[r] % w, y = from[r] / w;
    cand[r].push_back(from[r]);
    if (x + 1 < w) cand[r].push_back(from[r] + 1);
    if (x - 1 >= 0) cand[r].push_back(from[r] - 1);
    if (y + 1 < h) cand[r].push_back(from[r] + w);
    if (y - 1 >= 0) cand[r].push_back(from[r] - w);
  }
  std::vector<SmallConfig> out;
  std::vector<std::size_t> pick(from.size(), 0);
  for (;;) {
    SmallConfig to(from.size());
    for (std::size_t r = 0; r < from.size(); ++r)
      to[r] = static_cast<std::uint8_t>(cand[r][pick[r]]);
    bool ok = true;
    for (std::size_t a = 0; a < to.size() && ok; ++a)
      for (std::size_t b = 0; b < to.size() && ok; ++b) {
        if (a == b) continue;
        if (to[a] == to[b]) ok = false;
        if (to[a] == from[b] && to[b] == from[a] && from[a] != to[a]) ok = false;
      }
    if (ok) out.push_back(to);
    std::size_t r = 0;
    while (r < pick.size() && ++pick[r] == cand[r].size()) pick[r++] = 0;
    if (r == pick.size()) break;
  }
  return out;
}

int naive_makespan(SmallShape shape, const SmallConfig& xi, const SmallConfig& xg) {
  std::map<SmallConfig, int> dist;
  std::vector<SmallConfig> queue{xi};
  dist[xi] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    SmallConfig cur = queue[head];
    if (cur == xg) return dist[cur];
    int d = dist[cur];
    for (const SmallConfig& next : naive_successors(shape, cur))
      if (dist.emplace(next, d + 1).second) queue.push_back(next);
  }
  FAIL("naive oracle found no path");
  return -1;
}

SmallConfig random_config(ddm::Rng& rng, SmallShape shape, int n) {
  std::vector<std::uint8_t> cells(static_cast<std::size_t>(ddm::shape_cells(shape)));
  std::iota(cells.begin(), cells.end(), 0);
  rng.shuffle(cells);
  return SmallConfig(cells.begin(), cells.begin() + n);
}

std::uint64_t count_formula(int m, int n_max) {
  // sum over n of C(m,n)^2 * n!: choose the initial cells, the goal cells,
  // and the assignment of sorted initials to goals
  auto choose = [](int a, int b) {
    std::uint64_t r = 1;
    for (int k = 1; k <= b; ++k) r = r * static_cast<std::uint64_t>(a - k + 1) / k;
    return r;
  };
  std::uint64_t total = 0;
  for (int n = 1; n <= n_max; ++n) {
    std::uint64_t fact = 1;
    for (int k = 2; k <= n; ++k) fact *= k;
    total += choose(m, n) * choose(m, n) * fact;
  }
  return total;
}

}  // namespace

TEST_CASE("group actions satisfy the dihedral relations") {
  const SmallConfig probe{0, 1};
  for (const ddm::GroupAction& a : ddm::kActions3x3)
    for (const ddm::GroupAction& b : ddm::kActions3x3) {
      SmallConfig lhs = ddm::apply_group_action(
          a, ddm::apply_group_action(b, probe, SmallShape::S3x3), SmallShape::S3x3);
      SmallConfig rhs =
          ddm::apply_group_action(ddm::compose(a, b), probe, SmallShape::S3x3);
      REQUIRE(lhs == rhs);
    }
  for (const ddm::GroupAction& a : ddm::kActions3x3) {
    SmallConfig round = ddm::apply_group_action(
        ddm::inverse(a), ddm::apply_group_action(a, probe, SmallShape::S3x3),
        SmallShape::S3x3);
    REQUIRE(round == probe);
    REQUIRE(ddm::compose(a, ddm::inverse(a)) == ddm::GroupAction{0, false});
    REQUIRE(ddm::compose(ddm::inverse(a), a) == ddm::GroupAction{0, false});
  }
  // r has order 4, f order 2
  ddm::GroupAction r{1, false}, f{0, true};
  REQUIRE(ddm::compose(r, ddm::compose(r, ddm::compose(r, r))) == ddm::GroupAction{0, false});
  REQUIRE(ddm::compose(f, f) == ddm::GroupAction{0, false});
}

TEST_CASE("the eight 3x3 images of an asymmetric config are distinct") {
  std::set<SmallConfig> images;
  for (const ddm::GroupAction& a : ddm::kActions3x3)
    images.insert(ddm::apply_group_action(a, {0, 1}, SmallShape::S3x3));
  REQUIRE(images.size() == 8);
}

TEST_CASE("action names cover the composites") {
  REQUIRE(ddm::action_name({0, false}) == "1");
  REQUIRE(ddm::action_name({1, false}) == "r");
  REQUIRE(ddm::action_name({2, false}) == "r2");
  REQUIRE(ddm::action_name({0, true}) == "f");
  REQUIRE(ddm::action_name({2, true}) == "fr2");
}

TEST_CASE("odd rotations are rejected on the 2x3 shape") {
  REQUIRE(error_code_of([] {
            ddm::apply_group_action({1, false}, {0}, SmallShape::S2x3);
          }) == ddm::ErrorCode::InvalidAction);
  REQUIRE(error_code_of([] {
            ddm::transform_cell(SmallShape::S2x3, {3, true}, 2);
          }) == ddm::ErrorCode::InvalidAction);
  // the four legal 2x3 actions act within the shape
  for (const ddm::GroupAction& a : ddm::kActions2x3)
    for (std::uint8_t c = 0; c < 6; ++c)
      REQUIRE(ddm::transform_cell(SmallShape::S2x3, a, c) < 6);
}

TEST_CASE("canonicalize sorts the initial config and permutes the goal alongside") {
  ddm::Canonical canon = ddm::canonicalize({0, 6, 5}, {2, 8, 3});
  REQUIRE(canon.sorted_xi == SmallConfig{0, 5, 6});
  REQUIRE(canon.permuted_xg == SmallConfig{2, 3, 8});
  REQUIRE(canon.perm == std::vector<std::uint8_t>{0, 2, 1});
  REQUIRE(ddm::make_key(canon.sorted_xi, canon.permuted_xg) == "056 238");
}

TEST_CASE("config validation rejects bad cell sets") {
  REQUIRE(error_code_of([] { ddm::validate_config(SmallShape::S3x3, {0, 0}); }) ==
          ddm::ErrorCode::InvalidParameter);
  REQUIRE(error_code_of([] { ddm::validate_config(SmallShape::S2x3, {6}); }) ==
          ddm::ErrorCode::InvalidParameter);
  REQUIRE(error_code_of([] { ddm::validate_config(SmallShape::S3x3, {}); }) ==
          ddm::ErrorCode::InvalidParameter);
  REQUIRE(error_code_of([] { ddm::parse_shape("4x4"); }) ==
          ddm::ErrorCode::InvalidParameter);
  REQUIRE(error_code_of([] { ddm::decode_config("09"); }) == ddm::ErrorCode::Parse);
}

TEST_CASE("transition legality enforces the collision rules") {
  // head-to-head swap along an edge
  REQUIRE_FALSE(ddm::legal_transition(SmallShape::S2x3, {0, 1}, {1, 0}));
  // meeting on a vertex
  REQUIRE_FALSE(ddm::legal_transition(SmallShape::S2x3, {0, 2}, {1, 1}));
  // diagonal teleport
  REQUIRE_FALSE(ddm::legal_transition(SmallShape::S2x3, {0}, {4}));
  // a rotating cycle of four robots is legal
  REQUIRE(ddm::legal_transition(SmallShape::S3x3, {0, 1, 4, 3}, {1, 4, 3, 0}));
  // a chain following through a vacated cell is legal
  REQUIRE(ddm::legal_transition(SmallShape::S2x3, {0, 1}, {1, 2}));
  REQUIRE(ddm::legal_transition(SmallShape::S2x3, {0, 1}, {0, 1}));
}

TEST_CASE("joint space ranking is a bijection") {
  for (SmallShape shape : {SmallShape::S2x3, SmallShape::S3x3}) {
    int n = shape == SmallShape::S2x3 ? 3 : 2;
    ddm::JointSpace js(shape, n);
    std::uint32_t expect = 1;
    for (int k = 0; k < n; ++k) expect *= ddm::shape_cells(shape) - k;
    REQUIRE(js.count() == expect);
    for (std::uint32_t r = 0; r < js.count(); ++r) {
      SmallConfig c = js.unrank(r);
      REQUIRE(js.rank(c) == r);
    }
  }
  REQUIRE(error_code_of([] { ddm::JointSpace(SmallShape::S2x3, 7); }) ==
          ddm::ErrorCode::InvalidParameter);
}

TEST_CASE("successors come out in lexicographic order and obey the move rules") {
  ddm::JointSpace js(SmallShape::S2x3, 2);
  std::vector<SmallConfig> succ;
  js.for_each_successor({0, 1}, [&](const SmallConfig& c) { succ.push_back(c); });
  std::vector<SmallConfig> expect{{0, 1}, {0, 2}, {0, 4}, {1, 2}, {1, 4},
                                  {3, 0}, {3, 1}, {3, 2}, {3, 4}};
  REQUIRE(succ == expect);

  // agreement with the odometer enumeration on random configs, order aside
  ddm::Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 1 + static_cast<int>(rng.below(4));
    SmallConfig from = random_config(rng, SmallShape::S3x3, n);
    ddm::JointSpace space(SmallShape::S3x3, n);
    std::vector<SmallConfig> lib;
    space.for_each_successor(from, [&](const SmallConfig& c) { lib.push_back(c); });
    REQUIRE(std::is_sorted(lib.begin(), lib.end()));
    std::vector<SmallConfig> naive = naive_successors(SmallShape::S3x3, from);
    std::sort(naive.begin(), naive.end());
    REQUIRE(lib == naive);
  }
}

TEST_CASE("the oracle reproduces the canonical three-robot example") {
  SmallSolution sol = ddm::oracle_solve(SmallShape::S3x3, {0, 6, 5}, {2, 8, 3});
  REQUIRE(sol.makespan() == 2);
  REQUIRE(sol.steps == std::vector<SmallConfig>{{0, 6, 5}, {1, 7, 4}, {2, 8, 3}});
}

TEST_CASE("oracle solutions are optimal and legal") {
  REQUIRE(ddm::oracle_solve(SmallShape::S2x3, {3}, {3}).makespan() == 0);
  ddm::Rng rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    SmallShape shape = trial % 2 ? SmallShape::S3x3 : SmallShape::S2x3;
    int n_hi = shape == SmallShape::S2x3 ? 4 : 3;
    int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_hi)));
    SmallConfig xi = random_config(rng, shape, n);
    SmallConfig xg = random_config(rng, shape, n);
    SmallSolution sol = ddm::oracle_solve(shape, xi, xg);
    REQUIRE(ddm::solution_legal(shape, sol));
    REQUIRE(sol.steps.front() == xi);
    REQUIRE(sol.steps.back() == xg);
    REQUIRE(sol.makespan() == naive_makespan(shape, xi, xg));
  }
}

TEST_CASE("group images and reversals of a solution stay legal and optimal") {
  SmallSolution sol = ddm::oracle_solve(SmallShape::S3x3, {0, 6, 5}, {2, 8, 3});
  for (const ddm::GroupAction& a : ddm::kActions3x3) {
    SmallSolution moved;
    for (const SmallConfig& step : sol.steps)
      moved.steps.push_back(ddm::apply_group_action(a, step, SmallShape::S3x3));
    REQUIRE(ddm::solution_legal(SmallShape::S3x3, moved));
    REQUIRE(moved.makespan() == sol.makespan());
  }
  SmallSolution reversed;
  reversed.steps.assign(sol.steps.rbegin(), sol.steps.rend());
  REQUIRE(ddm::solution_legal(SmallShape::S3x3, reversed));
}

TEST_CASE("the full 2x3 database has one entry per distinct instance") {
  ddm::BuildOptions options;
  ddm::SolutionDatabase db = ddm::SolutionDatabase::build(SmallShape::S2x3, options);
  REQUIRE(db.size() == 13326);
  REQUIRE(db.size() == count_formula(6, 6));
  REQUIRE(db.n_max_full() == 6);

  // per-robot-count totals: initial subsets are stored sorted, so the key
  // prefix length gives the robot count
  std::vector<SmallConfig> subsets = ddm::detail::sorted_subsets(6, 2);
  REQUIRE(subsets.size() == 15);
  ddm::Rng rng(101);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 1 + static_cast<int>(rng.below(6));
    SmallConfig xi = random_config(rng, SmallShape::S2x3, n);
    SmallConfig xg = random_config(rng, SmallShape::S2x3, n);
    SmallSolution sol = db.lookup(xi, xg);
    REQUIRE(ddm::solution_legal(SmallShape::S2x3, sol));
    REQUIRE(sol.steps.front() == xi);
    REQUIRE(sol.steps.back() == xg);
    REQUIRE(sol.makespan() == naive_makespan(SmallShape::S2x3, xi, xg));
  }
}

TEST_CASE("the 3x3 database limited to two robots matches the closed-form count") {
  ddm::BuildOptions options;
  options.n_max = 2;
  ddm::SolutionDatabase db = ddm::SolutionDatabase::build(SmallShape::S3x3, options);
  REQUIRE(db.size() == 2673);
  REQUIRE(db.size() == count_formula(9, 2));

  // the canonical example entry is stored verbatim
  REQUIRE(db.raw_value("056 238") == nullptr);  // n = 3 is beyond the full range
  ddm::BuildOptions three;
  three.n_max = 3;
  ddm::SolutionDatabase db3 = ddm::SolutionDatabase::build(SmallShape::S3x3, three);
  REQUIRE(db3.size() == count_formula(9, 3));
  const std::string* value = db3.raw_value("056 238");
  REQUIRE(value != nullptr);
  REQUIRE(*value == "056 147 238");

  // lookup un-permutes into the caller's robot order
  SmallSolution sol = db3.lookup({0, 6, 5}, {2, 8, 3});
  REQUIRE(sol.steps == std::vector<SmallConfig>{{0, 6, 5}, {1, 7, 4}, {2, 8, 3}});
}

TEST_CASE("lazy fallback answers beyond the full range via the memoized oracle") {
  ddm::BuildOptions options;
  options.n_max = 2;
  ddm::SolutionDatabase db = ddm::SolutionDatabase::build(SmallShape::S3x3, options);
  ddm::Rng rng(77);
  for (int trial = 0; trial < 8; ++trial) {
    SmallConfig xi = random_config(rng, SmallShape::S3x3, 3);
    SmallConfig xg = random_config(rng, SmallShape::S3x3, 3);
    SmallSolution sol = db.lookup(xi, xg);
    REQUIRE(sol.makespan() == naive_makespan(SmallShape::S3x3, xi, xg));
    REQUIRE(db.lookup(xi, xg).steps == sol.steps);  // memo hit, same answer
  }
}

TEST_CASE("a full-mode database without fallback reports missing coverage") {
  ddm::BuildOptions options;
  options.n_max = 1;
  options.lazy_fallback = false;
  ddm::SolutionDatabase db = ddm::SolutionDatabase::build(SmallShape::S2x3, options);
  REQUIRE(db.size() == 36);
  REQUIRE(error_code_of([&] { db.lookup({0, 1}, {4, 5}); }) ==
          ddm::ErrorCode::DatabaseIntegrity);
}

TEST_CASE("a pure lazy database stores nothing and still answers") {
  ddm::BuildOptions options;
  options.mode = ddm::BuildMode::Lazy;
  ddm::SolutionDatabase db = ddm::SolutionDatabase::build(SmallShape::S2x3, options);
  REQUIRE(db.size() == 0);
  REQUIRE(db.lookup({0, 5}, {5, 0}).makespan() ==
          naive_makespan(SmallShape::S2x3, {0, 5}, {5, 0}));

  // concurrent lookups through the shared memo table
  std::vector<std::thread> pool;
  std::atomic<int> bad{0};
  for (int w = 0; w < 4; ++w)
    pool.emplace_back([&] {
      ddm::Rng rng(500 + w);
      for (int k = 0; k < 25; ++k) {
        SmallConfig xi = random_config(rng, SmallShape::S2x3, 3);
        SmallConfig xg = random_config(rng, SmallShape::S2x3, 3);
        SmallSolution sol = db.lookup(xi, xg);
        if (!ddm::solution_legal(SmallShape::S2x3, sol)) ++bad;
      }
    });
  for (std::thread& th : pool) th.join();
  REQUIRE(bad == 0);
}

TEST_CASE("build results do not depend on the thread count") {
  ddm::BuildOptions one;
  one.n_max = 4;
  ddm::BuildOptions four = one;
  four.threads = 4;
  ddm::SolutionDatabase a = ddm::SolutionDatabase::build(SmallShape::S2x3, one);
  ddm::SolutionDatabase b = ddm::SolutionDatabase::build(SmallShape::S2x3, four);
  REQUIRE(a.size() == b.size());
  ddm::Rng rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    int n = 1 + static_cast<int>(rng.below(4));
    SmallConfig xi = random_config(rng, SmallShape::S2x3, n);
    SmallConfig xg = random_config(rng, SmallShape::S2x3, n);
    ddm::Canonical canon = ddm::canonicalize(xi, xg);
    std::string key = ddm::make_key(canon.sorted_xi, canon.permuted_xg);
    REQUIRE(a.raw_value(key) != nullptr);
    REQUIRE(b.raw_value(key) != nullptr);
    REQUIRE(*a.raw_value(key) == *b.raw_value(key));
  }
}

TEST_CASE("save, load and cold lookup agree") {
  ddm::BuildOptions options;
  options.n_max = 2;
  ddm::SolutionDatabase db = ddm::SolutionDatabase::build(SmallShape::S3x3, options);
  std::string path = "subdb_roundtrip.bin";
  db.save(path);

  ddm::SolutionDatabase loaded = ddm::SolutionDatabase::load(path);
  REQUIRE(loaded.size() == db.size());
  REQUIRE(loaded.n_max_full() == 2);
  REQUIRE(loaded.shape() == SmallShape::S3x3);

  ddm::ColdDatabase cold(path);
  REQUIRE(cold.size() == db.size());
  ddm::Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    int n = 1 + static_cast<int>(rng.below(2));
    SmallConfig xi = random_config(rng, SmallShape::S3x3, n);
    SmallConfig xg = random_config(rng, SmallShape::S3x3, n);
    REQUIRE(loaded.lookup(xi, xg).steps == db.lookup(xi, xg).steps);
    REQUIRE(cold.lookup(xi, xg).steps == db.lookup(xi, xg).steps);
  }
  std::remove(path.c_str());

  REQUIRE(error_code_of([] { ddm::SolutionDatabase::load("no_such_db.bin"); }) ==
          ddm::ErrorCode::Parse);
}

TEST_CASE("an entry cap aborts the build with a checkpoint of complete levels") {
  std::string path = "subdb_checkpoint.bin";
  ddm::BuildOptions options;
  options.max_entries = 50;
  options.checkpoint_path = path;
  REQUIRE(error_code_of([&] {
            ddm::SolutionDatabase::build(SmallShape::S2x3, options);
          }) == ddm::ErrorCode::ResourceBudget);

  ddm::SolutionDatabase partial = ddm::SolutionDatabase::load(path);
  REQUIRE(partial.n_max_full() == 1);
  REQUIRE(partial.size() == 36);  // the single-robot level is complete
  REQUIRE(partial.lookup({2}, {5}).makespan() == 1);
  REQUIRE(partial.lookup({2}, {3}).makespan() == 3);
  std::remove(path.c_str());
}

TEST_CASE("random verification finds no mismatches in a sound database") {
  ddm::BuildOptions options;
  ddm::SolutionDatabase db = ddm::SolutionDatabase::build(SmallShape::S2x3, options);
  ddm::VerifyReport report = ddm::verify_database(db, 200, 424242);
  REQUIRE(report.checked == 200);
  REQUIRE(report.mismatches == 0);
}
