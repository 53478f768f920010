#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oblivext/compaction.hpp"
#include "oblivext/harness.hpp"
#include "oblivext/obsort.hpp"

/// Named algorithm runners with matching input generators, shared by the
/// command-line tool and the acceptance checks.
namespace oblivext {

struct CatalogParams {
  std::uint64_t R = 0;  // compaction bound in cells; 0 selects N/8
  std::uint64_t k = 0;  // selection rank; 0 selects ceil(N/3)
  std::uint64_t q = 0;  // quantile count; 0 selects floor((M/B)^{1/4})
  TightSparseParams sparse;
  LooseParams loose;
  LogStarParams logstar;
  PaddedSortParams sort;

  [[nodiscard]] std::uint64_t bound(const MemConfig& cfg) const { return R != 0 ? R : cfg.N / 8; }
  [[nodiscard]] std::uint64_t rank(const MemConfig& cfg) const { return k != 0 ? k : (cfg.N + 2) / 3; }
  [[nodiscard]] std::uint64_t quantile_count(const MemConfig& cfg) const;
};

struct RunOutcome {
  bool succeeded = true;
  std::vector<Cell> output;  // output region contents (compaction, routing, sorting)
  std::vector<Cell> values;  // selected values
  std::uint64_t output_blocks = 0;
};

struct CatalogEntry {
  std::string name;
  ScalingModel model = ScalingModel::Linear;
  std::function<std::vector<Cell>(std::mt19937_64&, const MemConfig&, const CatalogParams&)> gen;
  std::function<RunOutcome(ClientSession&, Region, const CatalogParams&)> run;
};

const std::vector<CatalogEntry>& catalog();
/// Throws PreconditionViolation for unknown names.
const CatalogEntry& find_algorithm(const std::string& name);

}  // namespace oblivext
