#include "oblivext/catalog.hpp"

#include <cmath>

#include "oblivext/io.hpp"
#include "oblivext/primitives.hpp"
#include "oblivext/selection.hpp"

namespace oblivext {

std::uint64_t CatalogParams::quantile_count(const MemConfig& cfg) const {
  return q != 0 ? q : DealParams::make(cfg).q;
}

namespace {

std::vector<Cell> keyed(std::mt19937_64& rng, const MemConfig& cfg, const CatalogParams&) {
  return generate(Generator::Uniform, cfg.N, 0, rng());
}

std::vector<Cell> marked(std::mt19937_64& rng, const MemConfig& cfg, const CatalogParams& p) {
  return generate(Generator::Uniform, cfg.N, p.bound(cfg), rng());
}

/// Whole blocks are either full of items or empty, each with probability 1/2.
std::vector<Cell> block_sparse(std::mt19937_64& rng, const MemConfig& cfg, const CatalogParams&) {
  std::vector<Cell> cells(cfg.N);
  bool full = false;
  for (std::uint64_t i = 0; i < cfg.N; ++i) {
    if (i % cfg.B == 0) full = rng() % 2 == 0;
    if (full) cells[i] = Cell::item(static_cast<std::int64_t>(rng() % 1000000), 0, i);
  }
  return cells;
}

std::vector<Cell> colored(std::mt19937_64& rng, const MemConfig& cfg, const CatalogParams& p) {
  auto cells = keyed(rng, cfg, p);
  const std::uint64_t colors = p.quantile_count(cfg) + 1;
  for (auto& c : cells) c.set_color(static_cast<std::uint32_t>(1 + rng() % colors));
  return cells;
}

RunOutcome from_region(ClientSession& s, Region R, bool ok = true) {
  return RunOutcome{ok, download(s.store(), R), {}, R.blocks};
}

RunOutcome from_compaction(ClientSession& s, const CompactionResult& r) {
  return from_region(s, r.output, r.succeeded);
}

std::vector<CatalogEntry> build() {
  std::vector<CatalogEntry> c;
  c.push_back({"consolidate", ScalingModel::Linear, marked, [](ClientSession& s, Region A, const CatalogParams&) {
                 return from_region(s, consolidate(s, A).out);
               }});
  c.push_back({"consolidate_multiway", ScalingModel::Linear, colored,
               [](ClientSession& s, Region A, const CatalogParams& p) {
                 const auto colors = static_cast<std::uint32_t>(p.quantile_count(s.cfg()) + 1);
                 return from_region(s, consolidate_multiway(s, A, colors).out);
               }});
  c.push_back({"thinning_pass", ScalingModel::Linear, block_sparse,
               [](ClientSession& s, Region A, const CatalogParams&) {
                 const Region C = s.allocate(std::max<std::uint64_t>(1, A.blocks / 2));
                 Tape tape = s.substream("thinning");
                 thinning_pass(s, A, C, tape);
                 return from_region(s, C);
               }});
  c.push_back({"det_oblivious_sort", ScalingModel::NLog2N, keyed,
               [](ClientSession& s, Region A, const CatalogParams&) {
                 det_oblivious_sort(s, A, key_less);
                 return from_region(s, A);
               }});
  c.push_back({"butterfly_route", ScalingModel::NLogMN, block_sparse,
               [](ClientSession& s, Region A, const CatalogParams&) {
                 compute_distance_labels(s, A);
                 butterfly_route(s, A);
                 return from_region(s, A);
               }});
  c.push_back({"butterfly_expand", ScalingModel::NLogMN, block_sparse,
               [](ClientSession& s, Region A, const CatalogParams&) {
                 compute_distance_labels(s, A);
                 butterfly_route(s, A);
                 butterfly_expand_in_place(s, A);
                 return from_region(s, A);
               }});
  c.push_back({"tight_sparse", ScalingModel::Linear, marked, [](ClientSession& s, Region A, const CatalogParams& p) {
                 return from_compaction(s, tight_sparse(s, A, p.bound(s.cfg()), p.sparse));
               }});
  c.push_back({"tight_dense", ScalingModel::NLogMN, marked, [](ClientSession& s, Region A, const CatalogParams&) {
                 return from_compaction(s, tight_dense(s, A));
               }});
  c.push_back({"compact_tight", ScalingModel::NLogMN, marked, [](ClientSession& s, Region A, const CatalogParams& p) {
                 return from_compaction(s, compact_tight(s, A, p.bound(s.cfg()), p.sparse));
               }});
  c.push_back({"loose", ScalingModel::Linear, marked, [](ClientSession& s, Region A, const CatalogParams& p) {
                 return from_compaction(s, loose(s, A, p.bound(s.cfg()), p.loose));
               }});
  c.push_back({"loose_logstar", ScalingModel::Linear, marked, [](ClientSession& s, Region A, const CatalogParams& p) {
                 return from_compaction(s, loose_logstar(s, A, p.bound(s.cfg()), p.logstar));
               }});
  c.push_back({"select", ScalingModel::Linear, keyed, [](ClientSession& s, Region A, const CatalogParams& p) {
                 const SelectResult r = select(s, A, p.rank(s.cfg()));
                 RunOutcome o;
                 o.succeeded = r.succeeded;
                 o.values = {r.value};
                 return o;
               }});
  c.push_back({"quantiles", ScalingModel::Linear, keyed, [](ClientSession& s, Region A, const CatalogParams& p) {
                 const QuantileResult r = quantiles(s, A, p.quantile_count(s.cfg()));
                 RunOutcome o;
                 o.succeeded = r.succeeded;
                 o.values = r.values;
                 return o;
               }});
  c.push_back({"padded_sort", ScalingModel::NLogMN, keyed, [](ClientSession& s, Region A, const CatalogParams& p) {
                 const PaddedSortResult r = padded_sort(s, A, p.sort);
                 return from_region(s, r.output, r.succeeded);
               }});
  c.push_back({"quicksort_control", ScalingModel::NLog2N, keyed,
               [](ClientSession& s, Region A, const CatalogParams&) {
                 quicksort_control(s, A);
                 return from_region(s, A);
               }});
  return c;
}

}  // namespace

const std::vector<CatalogEntry>& catalog() {
  static const std::vector<CatalogEntry> entries = build();
  return entries;
}

const CatalogEntry& find_algorithm(const std::string& name) {
  for (const auto& e : catalog()) {
    if (e.name == name) return e;
  }
  std::string known;
  for (const auto& e : catalog()) known += (known.empty() ? "" : ", ") + e.name;
  throw PreconditionViolation("unknown algorithm `" + name + "` (known: " + known + ")");
}

}  // namespace oblivext
