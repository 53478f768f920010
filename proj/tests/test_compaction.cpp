#include <memory>
#include <numeric>

#include "doctest.h"
#include "oblivext/compaction.hpp"
#include "support.hpp"

using namespace oblivext;
using namespace oblivext::testing;

namespace {

std::vector<std::uint64_t> origins(const std::vector<Cell>& cells) {
  std::vector<std::uint64_t> out;
  for (const auto& c : cells) {
    if (c.occupied()) out.push_back(c.origin());
  }
  return out;
}

std::vector<std::uint64_t> sorted_origins(const std::vector<Cell>& cells) {
  auto o = origins(cells);
  std::sort(o.begin(), o.end());
  return o;
}

std::vector<Cell> marked(std::size_t n, const std::vector<std::size_t>& positions) {
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < n; ++i) cells.push_back(Cell::item(static_cast<std::int64_t>(100 + i), 0, i));
  for (auto p : positions) cells[p].set_distinguished(true);
  return cells;
}

std::vector<Cell> clustered(std::mt19937_64& rng, std::size_t n, std::size_t R) {
  std::vector<Cell> cells = random_cells(rng, n, 0.0);
  const std::size_t start = std::uniform_int_distribution<std::size_t>(0, n - R)(rng);
  for (std::size_t i = start; i < start + R; ++i) cells[i].set_distinguished(true);
  return cells;
}

}  // namespace

TEST_CASE("tight_sparse keeps the marked cells in order") {
  for (const std::uint64_t B : {1, 4}) {
    Env e({16, B, 8 * B});
    const auto cells = marked(16, {2, 5, 11, 13});
    const auto res = tight_sparse(e.s, upload(e.store, cells), 4);
    CHECK(res.succeeded);
    CHECK(res.output.blocks == ceil_div(4, B));
    CHECK(origins(download(e.store, res.output)) == std::vector<std::uint64_t>{2, 5, 11, 13});
  }
}

TEST_CASE("tight_sparse with r = n and everything marked returns the input") {
  Env e({16, 2, 16});
  std::vector<std::size_t> all(16);
  std::iota(all.begin(), all.end(), 0);
  const auto cells = marked(16, all);
  const auto res = tight_sparse(e.s, upload(e.store, cells), 16);
  CHECK(res.succeeded);
  CHECK(origins(download(e.store, res.output)) == origins(cells));
}

TEST_CASE("tight_sparse reports capacity overflow without changing its trace") {
  auto run = [](std::size_t marks) {
    auto e = std::make_unique<Env>(MemConfig{64, 2, 16});
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < marks; ++i) pos.push_back(i * 3);
    const auto res = tight_sparse(e->s, upload(e->store, marked(64, pos)), 8);
    return std::make_pair(std::move(e), res);
  };
  auto [a, ra] = run(8);
  auto [b, rb] = run(20);
  CHECK(ra.succeeded);
  CHECK_FALSE(rb.succeeded);
  CHECK(rb.status == CompactionStatus::CapacityExceeded);
  CHECK_FALSE(a->store.trace().first_divergence(b->store.trace()).has_value());
}

TEST_CASE("tight_sparse matches the filter oracle on random inputs") {
  std::mt19937_64 rng(2);
  int succeeded = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Env e({256, 4, 64}, trial);
    const auto cells = random_cells(rng, 256, 0.1);
    const auto expect = stable_filter(cells);
    const auto res = tight_sparse(e.s, upload(e.store, cells), 48);
    CHECK(res.output.blocks == 12);
    if (expect.size() > 48) {
      CHECK_FALSE(res.succeeded);
      continue;
    }
    if (!res.succeeded) continue;
    ++succeeded;
    CHECK(origins(download(e.store, res.output)) == origins(expect));
  }
  CHECK(succeeded > 80);
}

TEST_CASE("tight_dense matches the filter oracle") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    Env e({1024, 4, 16});
    const auto cells = random_cells(rng, 1024, trial % 10 / 10.0);
    const auto res = tight_dense(e.s, upload(e.store, cells));
    const auto out = download(e.store, res.output);
    const auto expect = stable_filter(cells);
    CHECK(res.count == expect.size());
    CHECK(std::vector<Cell>(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(expect.size())) == expect);
    CHECK(origins(out).size() == expect.size());
  }
}

TEST_CASE("tight_dense: all marked is the identity and R = 0 has the same trace") {
  Env a({64, 4, 16}), b({64, 4, 16});
  std::mt19937_64 rng(1);
  const auto all = random_cells(rng, 64, 1.0);
  const auto none = random_cells(rng, 64, 0.0);
  const auto ra = tight_dense(a.s, upload(a.store, all));
  tight_dense(b.s, upload(b.store, none));
  CHECK(download(a.store, ra.output) == all);
  CHECK_FALSE(a.store.trace().first_divergence(b.store.trace()).has_value());
}

TEST_CASE("compact_tight produces exactly ceil(r/B) blocks either way") {
  std::mt19937_64 rng(8);
  for (const std::uint64_t r : {16, 200}) {
    Env e({4096, 4, 64});
    const auto cells = clustered(rng, 4096, r / 2);
    const auto res = compact_tight(e.s, upload(e.store, cells), r);
    CHECK(res.output.blocks == ceil_div(r, 4));
    CHECK(res.succeeded);
    CHECK(origins(download(e.store, res.output)) == origins(stable_filter(cells)));
  }
}

TEST_CASE("plan picks the sparse path only within the failure budget") {
  BlockStore st(16, 1);
  ClientSession s({1 << 16, 16, 4096}, 1, st);
  const auto small = plan_tight(s, 4096, 4 * 16);
  CHECK(small.sparse_failure_bound > 1.0 / 4096);
  CHECK_FALSE(small.use_sparse);
  const auto big = plan_tight(s, 4096, 512 * 16);
  CHECK(big.sparse_failure_bound < 1.0 / 4096);
}

TEST_CASE("loose: nothing marked gives an empty output") {
  Env e({1 << 12, 16, 256});
  std::mt19937_64 rng(3);
  const auto res = loose(e.s, upload(e.store, random_cells(rng, 1 << 12, 0.0)), 256);
  CHECK(res.succeeded);
  CHECK(res.output.blocks == 5 * 16);
  CHECK(origins(download(e.store, res.output)).empty());
}

TEST_CASE("loose: multiset preserved at N = 2^14, R = N/8") {
  std::mt19937_64 rng(5);
  const std::uint64_t N = 1 << 14, R = N / 8;
  for (int seed = 0; seed < 10; ++seed) {
    Env e({N, 16, 256}, seed);
    const auto cells = seed % 2 == 0 ? clustered(rng, N, R) : random_cells(rng, N, 0.12);
    const auto expect = stable_filter(cells);
    if (expect.size() > R) continue;
    const auto res = loose(e.s, upload(e.store, cells), R);
    CHECK(res.output.blocks == 5 * R / 16);
    CHECK(res.capacity == 5 * R);
    CHECK(res.succeeded);
    CHECK(sorted_origins(download(e.store, res.output)) == sorted_origins(expect));
    CHECK(e.s.peak_cache() <= 256);
  }
}

TEST_CASE("loose: trace is the same for different data") {
  auto run = [](bool cluster) {
    auto e = std::make_unique<Env>(MemConfig{1 << 12, 16, 256}, 9);
    std::mt19937_64 rng(cluster ? 1 : 2);
    const auto cells = cluster ? clustered(rng, 1 << 12, 500) : random_cells(rng, 1 << 12, 0.05);
    loose(e->s, upload(e->store, cells), 512);
    return e;
  };
  CHECK_FALSE(run(true)->store.trace().first_divergence(run(false)->store.trace()).has_value());
}

TEST_CASE("loose rejects R >= N/4") {
  Env e({1024, 16, 256});
  CHECK_THROWS_AS(loose(e.s, e.s.allocate(64), 256), PreconditionViolation);
}

TEST_CASE("tower schedule") {
  CHECK(TowerSchedule::make(4, 1 << 20).t == std::vector<std::uint64_t>{4, 16, 65536});
  CHECK(TowerSchedule::make(2, 10).t == std::vector<std::uint64_t>{2, 4, 16});
}

TEST_CASE("loose_logstar base case sorts small inputs") {
  Env e({256, 4, 32});
  std::mt19937_64 rng(6);
  const auto cells = random_cells(rng, 256, 0.2);
  const auto expect = stable_filter(cells);
  const auto res = loose_logstar(e.s, upload(e.store, cells), 64);
  CHECK(res.method == "logstar-base-sort");
  CHECK(res.output.blocks == 4 * 16 + 4);
  if (expect.size() <= 64) CHECK(origins(download(e.store, res.output)) == origins(expect));
}

TEST_CASE("loose_logstar sparse base case equals tight compaction") {
  Env e({1 << 14, 4, 64});
  std::mt19937_64 rng(7);
  const auto cells = clustered(rng, 1 << 14, 40);
  const auto res = loose_logstar(e.s, upload(e.store, cells), 40);
  CHECK(res.method == "logstar-base-tight");
  CHECK(res.succeeded);
  CHECK(origins(download(e.store, res.output)) == origins(stable_filter(cells)));
}

TEST_CASE("loose_logstar phases preserve the multiset") {
  std::mt19937_64 rng(10);
  const std::uint64_t N = 1 << 14;
  for (const std::uint64_t t1 : {4, 2}) {
    for (int seed = 0; seed < 4; ++seed) {
      Env e({N, 4, 64}, seed);
      const std::uint64_t R = N / 8;
      const auto cells = seed % 2 == 0 ? clustered(rng, N, R) : random_cells(rng, N, 0.1);
      LogStarParams p;
      p.t1 = t1;
      const auto res = loose_logstar(e.s, upload(e.store, cells), R, p);
      CHECK(res.method == "loose_logstar");
      CHECK(res.output.blocks == logstar_capacity_blocks(R, 4));
      CHECK(res.succeeded);
      CHECK(sorted_origins(download(e.store, res.output)) == sorted_origins(stable_filter(cells)));
    }
  }
}
