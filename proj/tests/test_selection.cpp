#include <algorithm>
#include <memory>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oblivext/selection.hpp"
#include "support.hpp"

using namespace oblivext;
using oblivext::testing::Env;

namespace {

std::vector<Cell> permutation(std::uint64_t n, std::uint64_t seed) {
  std::vector<std::int64_t> keys(n);
  std::iota(keys.begin(), keys.end(), 1);
  std::mt19937_64 rng(seed);
  std::shuffle(keys.begin(), keys.end(), rng);
  return oblivext::testing::make_cells(keys);
}

/// Oracle: the k-th smallest occupied cell under (key, origin).
Cell oracle_rank(std::vector<Cell> cells, std::uint64_t k) {
  std::erase_if(cells, [](const Cell& c) { return c.empty(); });
  std::sort(cells.begin(), cells.end(), key_less);
  return cells.at(k - 1);
}

}  // namespace

TEST_CASE("select: extreme rank of a permutation is its minimum") {
  Env e(MemConfig{8192, 16, 256}, 3);
  const auto res = select(e.s, upload(e.store, permutation(8192, 1)), 1);
  REQUIRE(res.succeeded);
  CHECK(res.value.key() == 1);
}

TEST_CASE("select: median of a permutation of 1..4096") {
  Env e(MemConfig{4096, 16, 256}, 5);
  const auto plan = SelectionPlan::make(4096, 2048);
  CHECK_FALSE(plan.direct);
  const auto res = select(e.s, upload(e.store, permutation(4096, 2)), 2048);
  REQUIRE(res.succeeded);
  CHECK(res.value.key() == 2048);
}

TEST_CASE("select: plan caps depend only on N") {
  const auto a = SelectionPlan::make(1 << 16, 1);
  const auto b = SelectionPlan::make(1 << 16, 1 << 15);
  CHECK(a.sample_cap == b.sample_cap);
  CHECK(a.range_cap == b.range_cap);
  CHECK(a.sample_cap == 256 + 64);
  CHECK(a.range_cap == std::min<std::uint64_t>(1 << 16, 8 * 16384));
  CHECK_THROWS_AS(SelectionPlan::make(100, 0), PreconditionViolation);
  CHECK_THROWS_AS(SelectionPlan::make(100, 101), PreconditionViolation);
}

TEST_CASE("select: pivot ranks are -inf/+inf when out of the sample") {
  const auto p = SelectionPlan::make(1 << 16, 1);
  CHECK(p.rank_lo(256) == 0);
  CHECK(p.rank_hi(256, 1 << 16) <= 256);
  const auto top = SelectionPlan::make(1 << 16, 1 << 16);
  CHECK(top.rank_hi(256, 1 << 16) == 257);
  CHECK(top.rank_lo(256) == 256 - 64);
}

TEST_CASE("select: direct branch matches the oracle for every rank") {
  std::mt19937_64 rng(7);
  auto cells = oblivext::testing::random_cells(rng, 200, 0, 50);
  for (std::uint64_t k = 1; k <= 200; k += 13) {
    Env e(MemConfig{200, 4, 32});
    const auto res = select(e.s, upload(e.store, cells), k);
    REQUIRE(res.succeeded);
    CHECK(res.value == oracle_rank(cells, k));
  }
}

TEST_CASE("select: randomized branch matches the oracle with duplicate keys") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 6; ++trial) {
    auto cells = oblivext::testing::random_cells(rng, 8192, 0, 300);
    const std::uint64_t k = 1 + rng() % 8192;
    Env e(MemConfig{8192, 8, 128}, 100 + trial);
    const auto res = select(e.s, upload(e.store, cells), k);
    REQUIRE(res.succeeded);
    CHECK(res.value == oracle_rank(cells, k));
  }
}

TEST_CASE("select: empty cells count as +infinity") {
  std::vector<Cell> cells = permutation(5000, 4);
  cells.resize(6000);  // trailing empties
  Env e(MemConfig{6000, 8, 128}, 9);
  const auto res = select(e.s, upload(e.store, cells), 4999);
  REQUIRE(res.succeeded);
  CHECK(res.value.key() == 4999);
  Env f(MemConfig{6000, 8, 128}, 9);
  const auto miss = select(f.s, upload(f.store, cells), 5001);
  CHECK_FALSE(miss.succeeded);
  CHECK(miss.status == SelectionStatus::RankUnavailable);
}

TEST_CASE("select: trace is fixed across data and ranks") {
  std::mt19937_64 rng(21);
  std::unique_ptr<Env> first;
  for (int inst = 0; inst < 5; ++inst) {
    auto e = std::make_unique<Env>(MemConfig{4096, 16, 256}, 77);
    const auto cells = oblivext::testing::random_cells(rng, 4096, 0, inst == 0 ? 1 : 1 << 20);
    select(e->s, upload(e->store, cells), 1 + rng() % 4096);
    if (!first) {
      first = std::move(e);
    } else {
      CHECK_FALSE(first->store.trace().first_divergence(e->store.trace()).has_value());
    }
  }
}

TEST_CASE("quantiles: q=1 is the median") {
  std::mt19937_64 rng(5);
  auto cells = oblivext::testing::random_cells(rng, 4096, 0, 1 << 20);
  Env e(MemConfig{4096, 16, 256}, 3);
  const auto res = quantiles(e.s, upload(e.store, cells), 1);
  REQUIRE(res.succeeded);
  CHECK(res.values[0] == oracle_rank(cells, 2048));
}

TEST_CASE("quantiles: direct branch on sorted input reads the exact ranks") {
  std::vector<std::int64_t> keys(4096);
  std::iota(keys.begin(), keys.end(), 1);
  Env e(MemConfig{4096, 16, 2048});  // (M/B)^{1/4} > 3
  const auto plan = QuantilePlan::make(e.s.cfg(), 4096, 3);
  CHECK(plan.direct);
  const auto res = quantiles(e.s, upload(e.store, oblivext::testing::make_cells(keys)), 3);
  REQUIRE(res.succeeded);
  CHECK(res.values[0].key() == 1024);
  CHECK(res.values[1].key() == 2048);
  CHECK(res.values[2].key() == 3072);
}

TEST_CASE("quantiles: preconditions") {
  Env e(MemConfig{4096, 16, 256});
  CHECK_THROWS_AS(QuantilePlan::make(e.s.cfg(), 4096, 0), PreconditionViolation);
  CHECK_NOTHROW(QuantilePlan::make(e.s.cfg(), 4096, 2));  // (M/B)^{1/4} = 2
  CHECK_THROWS_AS(QuantilePlan::make(e.s.cfg(), 4096, 3), PreconditionViolation);
}

TEST_CASE("quantiles: sampled branch matches the oracle and keeps a fixed trace") {
  // m = 8 and (N/B)^{1/4} = 8 at N = 16384, B = 4, so the sampled branch runs.
  const MemConfig cfg{16384, 4, 32};
  std::mt19937_64 rng(33);
  std::unique_ptr<Env> first;
  for (int inst = 0; inst < 3; ++inst) {
    auto e = std::make_unique<Env>(cfg, 55);
    const auto plan = QuantilePlan::make(e->s.cfg(), 16384, 1);
    REQUIRE_FALSE(plan.direct);
    const auto cells = oblivext::testing::random_cells(rng, 16384, 0, 1 << 24);
    const auto res = quantiles(e->s, upload(e->store, cells), 1);
    REQUIRE(res.succeeded);
    CHECK(res.values[0] == oracle_rank(cells, 8192));
    if (!first) {
      first = std::move(e);
    } else {
      CHECK_FALSE(first->store.trace().first_divergence(e->store.trace()).has_value());
    }
  }
}
