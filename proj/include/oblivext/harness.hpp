#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "oblivext/em_model.hpp"

/// Verification machinery: trace comparison, plain reference oracles,
/// failure-rate gates and I/O scaling fits.
namespace oblivext {

/// A store plus a session over it, for one run.
struct Sandbox {
  BlockStore store;
  ClientSession s;
  Sandbox(const MemConfig& cfg, std::uint64_t seed, bool record_trace = true);
};

using Algorithm = std::function<void(ClientSession&, Region)>;
using InputGen = std::function<std::vector<Cell>(std::mt19937_64&)>;

// ---------------------------------------------------------------------------
// Obliviousness
// ---------------------------------------------------------------------------

struct OblivinessReport {
  std::string algo;
  MemConfig cfg;
  std::uint64_t seeds = 0;
  std::uint64_t pairs = 0;
  bool all_equal = true;
  std::optional<std::uint64_t> first_divergence;
  std::uint64_t trace_length = 0;
  std::uint64_t peak_cache = 0;  // largest client cache occupancy seen (cells)
};

/// For each seed runs `algo` on `inputs_per_seed` inputs drawn from `gen`
/// (data randomness independent of the seed's tape) and compares every trace
/// with the first one of that seed.
OblivinessReport verify_oblivious(const std::string& algo, const MemConfig& cfg,
                                  const std::vector<std::uint64_t>& seeds, std::uint64_t inputs_per_seed,
                                  const InputGen& gen, const Algorithm& run, std::uint64_t data_seed = 1);

/// Negative control: an ordinary in-place quicksort over the cells of A,
/// reading and writing the block of every cell it touches.
void quicksort_control(ClientSession& s, Region A);

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

struct OracleOutcome {
  bool succeeded = false;
  bool matches = false;  // only meaningful when succeeded
};

struct OracleSummary {
  std::string algo;
  std::uint64_t instances = 0;
  std::uint64_t succeeded = 0;
  std::uint64_t failed = 0;
  std::uint64_t mismatches = 0;
  [[nodiscard]] bool pass() const { return mismatches == 0; }
};

OracleSummary oracle_check(const std::string& algo, std::uint64_t instances,
                           const std::function<OracleOutcome(std::uint64_t)>& trial);

/// Reference results computed with plain std algorithms.
std::vector<Cell> oracle_filter(const std::vector<Cell>& cells);
std::vector<Cell> oracle_sort(const std::vector<Cell>& cells);
Cell oracle_rank(const std::vector<Cell>& cells, std::uint64_t k);

/// (key, origin) of the occupied cells in order; marks are ignored.
std::vector<std::pair<std::int64_t, std::uint64_t>> item_ids(const std::vector<Cell>& cells);

// ---------------------------------------------------------------------------
// Failure-rate gates
// ---------------------------------------------------------------------------

/// One-sided Clopper-Pearson upper confidence bound on a binomial rate.
double binomial_ucb(std::uint64_t failures, std::uint64_t runs, double confidence = 0.95);

struct RateGate {
  std::string algo;
  std::uint64_t N = 0;
  std::uint64_t runs = 0;
  std::uint64_t failures = 0;
  double bound = 0;
  [[nodiscard]] double rate() const { return runs == 0 ? 0.0 : static_cast<double>(failures) / static_cast<double>(runs); }
  [[nodiscard]] double ucb95() const { return binomial_ucb(failures, runs); }
  [[nodiscard]] bool pass_point() const { return rate() <= bound; }
  [[nodiscard]] bool pass_ucb() const { return ucb95() <= bound; }
};

// ---------------------------------------------------------------------------
// Scaling fits
// ---------------------------------------------------------------------------

enum class ScalingModel { Linear, NLogMN, NLog2N };
std::string_view to_string(ScalingModel m);

/// Model value for n = N/B blocks and m = M/B.
double model_value(ScalingModel model, double n, double m);

struct ScalingPoint {
  std::uint64_t N = 0;
  std::uint64_t ios = 0;
  double model = 0;
  double ratio = 0;
};

struct ScalingReport {
  std::string algo;
  ScalingModel model = ScalingModel::Linear;
  std::vector<ScalingPoint> points;
  double fitted_constant = 0;     // least-squares c in ios ~ c * model
  double max_residual_ratio = 0;  // max over points of max(ios/fit, fit/ios)
  double drift_per_doubling = 0;  // geometric growth of ios/model per doubling of N
  bool monotone_growth = false;
  bool flagged = false;           // drift_per_doubling exceeds the limit
};

/// Requires at least four sizes in geometric progression.
ScalingReport fit_scaling(const std::string& algo, std::uint64_t B, std::uint64_t M,
                          const std::vector<std::pair<std::uint64_t, std::uint64_t>>& series, ScalingModel model,
                          double drift_limit = 0.15);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

void write_oblivious_report(std::ostream& out, const std::vector<OblivinessReport>& reports);
void write_scaling_report(std::ostream& out, const std::vector<ScalingReport>& reports);
void write_failure_rates(std::ostream& out, const std::vector<RateGate>& gates);

}  // namespace oblivext
