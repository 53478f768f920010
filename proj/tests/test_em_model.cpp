#include <sstream>

#include "doctest.h"
#include "support.hpp"

using namespace oblivext;
using namespace oblivext::testing;

TEST_CASE("config derives n and m and validates") {
  MemConfig c{100, 8, 64};
  CHECK(c.n() == 13);
  CHECK(c.m() == 8);
  CHECK_THROWS_AS((MemConfig{16, 8, 8}.validate()), PreconditionViolation);
  CHECK_THROWS_AS(c.require_cache_blocks(9, "x"), PreconditionViolation);
  CHECK_NOTHROW(c.require_cache_blocks(8, "x"));
}

TEST_CASE("empty cells refuse key access") {
  Cell c;
  CHECK(c.empty());
  CHECK_THROWS_AS((void)c.key(), ContractError);
  CHECK_THROWS_AS((void)c.value(), ContractError);
  CHECK_FALSE(c.distinguished());
}

TEST_CASE("every store access appends one event and never data") {
  Env e({16, 4, 16});
  const Region r = e.s.allocate(2);
  {
    auto b = e.s.read(r.at(1));
    b->cells[0] = Cell::item(7, 7, 0);
    e.s.write(r.at(0), *b);
  }
  const auto& t = e.store.trace();
  REQUIRE(t.size() == 2);
  CHECK(t.at(0) == TraceEvent{Op::Read, 1});
  CHECK(t.at(1) == TraceEvent{Op::Write, 0});
  std::ostringstream os;
  t.write_csv(os);
  CHECK(os.str() == "seq,op,addr,epoch\n0,R,1,\n1,W,0,\n");
}

TEST_CASE("out-of-range address is rejected") {
  Env e({16, 4, 16});
  e.s.allocate(1);
  CHECK_THROWS_AS(e.s.read(5), AddressOutOfRange);
}

TEST_CASE("cache accounting refuses to exceed M") {
  Env e({16, 4, 8});
  const Region r = e.s.allocate(3);
  auto a = e.s.read(r.at(0));
  auto b = e.s.read(r.at(1));
  CHECK(e.s.cache_used() == 8);
  CHECK_THROWS_AS(e.s.read(r.at(2)), CacheOverflow);
  CHECK(e.s.peak_cache() == 8);
}

TEST_CASE("leases return cells on destruction") {
  Env e({16, 4, 8});
  { auto l = e.s.reserve(6); CHECK(e.s.cache_free() == 2); }
  CHECK(e.s.cache_free() == 8);
}

TEST_CASE("same seed gives the same tape") {
  BlockStore st(4, 1);
  ClientSession a({16, 4, 16}, 42, st), b({16, 4, 16}, 42, st);
  for (int i = 0; i < 10; ++i) CHECK(a.tape().next() == b.tape().next());
  CHECK(a.substream("x").next() == b.substream("x").next());
}

TEST_CASE("epochs label trace segments") {
  Env e({16, 4, 16});
  const Region r = e.s.allocate(1);
  e.s.epoch("one");
  { auto b = e.s.read(r.at(0)); }
  e.s.epoch("two");
  { auto b = e.s.read(r.at(0)); e.s.write(r.at(0), *b); }
  CHECK(e.store.trace().epoch_length("one") == 1);
  CHECK(e.store.trace().epoch_length("two") == 2);
}

TEST_CASE("trace divergence is located") {
  Env a({16, 4, 16}), b({16, 4, 16});
  const Region ra = a.s.allocate(2), rb = b.s.allocate(2);
  { auto x = a.s.read(ra.at(0)); }
  { auto x = b.s.read(rb.at(1)); }
  CHECK(a.store.trace().first_divergence(b.store.trace()) == std::optional<std::size_t>{0});
  CHECK_FALSE(a.store.trace().first_divergence(a.store.trace()).has_value());
}

TEST_CASE("scratch scope rewinds allocations") {
  Env e({16, 4, 16});
  e.s.allocate(2);
  { ScratchScope scope(e.s); e.s.allocate(5); CHECK(e.store.size() == 7); }
  CHECK(e.store.size() == 2);
}

TEST_CASE("upload and download round-trip without tracing") {
  Env e({16, 4, 16});
  const auto cells = make_cells({1, 2, 3, 4, 5});
  const Region r = upload(e.store, cells);
  CHECK(r.blocks == 2);
  const auto back = download(e.store, r);
  CHECK(occupied_keys(back) == std::vector<std::int64_t>{1, 2, 3, 4, 5});
  CHECK(e.store.trace().total_events() == 0);
}
