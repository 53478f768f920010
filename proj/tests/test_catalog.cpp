#include "doctest.h"
#include "oblivext/catalog.hpp"

using namespace oblivext;

TEST_CASE("catalog: every entry runs at a small size within the cache") {
  const MemConfig cfg{4096, 16, 256};
  const CatalogParams cp;
  for (const auto& e : catalog()) {
    CAPTURE(e.name);
    Sandbox box(cfg, 5, false);
    std::mt19937_64 rng(9);
    const Region A = upload(box.store, e.gen(rng, cfg, cp));
    const RunOutcome o = e.run(box.s, A, cp);
    CHECK(o.succeeded);
    CHECK(box.s.peak_cache() <= cfg.M);
    if (e.name == "select") {
      REQUIRE(o.values.size() == 1);
    } else if (e.name == "quantiles") {
      CHECK(o.values.size() == cp.quantile_count(cfg));
    } else {
      CHECK(o.output.size() == o.output_blocks * cfg.B);
    }
  }
}

TEST_CASE("catalog: select entry agrees with the oracle") {
  const MemConfig cfg{8192, 16, 256};
  CatalogParams cp;
  cp.k = 777;
  const auto& e = find_algorithm("select");
  Sandbox box(cfg, 2, false);
  std::mt19937_64 rng(4);
  const auto input = e.gen(rng, cfg, cp);
  const RunOutcome o = e.run(box.s, upload(box.store, input), cp);
  REQUIRE(o.succeeded);
  CHECK(o.values[0].key() == oracle_rank(input, 777).key());
}

TEST_CASE("catalog: unknown names are rejected with the known list") {
  CHECK_THROWS_AS(find_algorithm("bogo_sort"), PreconditionViolation);
  try {
    find_algorithm("bogo_sort");
  } catch (const PreconditionViolation& e) {
    CHECK(std::string(e.what()).find("padded_sort") != std::string::npos);
  }
}
