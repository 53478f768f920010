#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "oblivext/em_model.hpp"
#include "oblivext/iblt.hpp"
#include "oblivext/primitives.hpp"

/// Tight and loose compaction of the distinguished cells of an array.
///
/// Every routine takes the capacity bound R as a public parameter and writes
/// an output region whose size depends only on (N, B, M, R). Randomized
/// variants never abort: they run their full access schedule and report
/// failure in the result record.
namespace oblivext {

enum class CompactionStatus {
  Ok,
  CapacityExceeded,  // more distinguished cells than the declared bound
  DecodeFailure,     // IBLT listing incomplete
  RegionOverflow,    // a halving region or a log-star region was over-crowded
  ResidueOverflow,   // leftover items exceeded their reserved space
  PhaseInvariant,    // log-star phase started with too many items left
};

std::string_view to_string(CompactionStatus s);

struct CompactionResult {
  Region output;                  // output blocks; size is a function of public parameters
  std::uint64_t capacity = 0;     // declared output capacity in cells
  std::uint64_t count = 0;        // distinguished cells found (client-side)
  bool tight = false;
  bool order_preserving = false;
  bool succeeded = true;
  CompactionStatus status = CompactionStatus::Ok;
  std::string_view method;        // which construction produced the output
};

/// Number of output blocks for each construction; all are functions of the
/// public bound R (cells) and B only.
std::uint64_t tight_capacity_blocks(std::uint64_t R, std::uint64_t B);
std::uint64_t loose_capacity_blocks(std::uint64_t R, std::uint64_t B);    // 5r
std::uint64_t logstar_capacity_blocks(std::uint64_t R, std::uint64_t B);  // 4r + ceil(r/4)

// ---------------------------------------------------------------------------
// Tight compaction
// ---------------------------------------------------------------------------

struct TightSparseParams {
  unsigned k = 4;            // IBLT hash functions
  double table_factor = 3;   // table rows per capacity block
};

/// IBLT-based tight order-preserving compaction into ceil(r/B) blocks:
/// consolidate, insert every non-empty block (touch the empty ones), list the
/// table with a fixed scan schedule, pack the listed blocks, then sort the
/// output cells by original index.
CompactionResult tight_sparse(ClientSession& s, Region A, std::uint64_t r, TightSparseParams p = {});

/// Deterministic tight order-preserving compaction: consolidate, label
/// blocks with their distance to the left, route through the butterfly
/// network. The output region keeps A.blocks blocks; the first R cells hold
/// the distinguished items in order.
CompactionResult tight_dense(ClientSession& s, Region A);

/// Estimated I/O counts and stopping-set failure bound used to pick a tight
/// construction; all inputs are public.
struct TightPlan {
  std::uint64_t sparse_ios = 0;
  std::uint64_t dense_ios = 0;
  double sparse_failure_bound = 1.0;
  bool use_sparse = false;
};
TightPlan plan_tight(const ClientSession& s, std::uint64_t n_blocks, std::uint64_t r, TightSparseParams p = {});

/// Tight compaction into exactly ceil(r/B) blocks. Uses tight_sparse when it
/// is cheaper and its failure bound is within (n)^-d, else tight_dense
/// followed by a copy of the prefix.
CompactionResult compact_tight(ClientSession& s, Region A, std::uint64_t r, TightSparseParams p = {});

// ---------------------------------------------------------------------------
// Loose compaction
// ---------------------------------------------------------------------------

struct LooseParams {
  unsigned c0 = 3;  // thinning passes
  unsigned c1 = 0;  // region length factor; 0 selects d + 2
};

/// Randomized loose compaction into 5r blocks (r = ceil(R/B)): 4r blocks
/// filled by thinning passes followed by a residue of r blocks obtained by
/// repeated region halving. Requires R < N/4 and the wide-block/tall-cache
/// assumptions.
CompactionResult loose(ClientSession& s, Region A, std::uint64_t R, LooseParams p = {});

/// Tower-of-twos sequence t_1 = first, t_{i+1} = 2^{t_i}, truncated once a
/// term reaches `limit`.
struct TowerSchedule {
  std::vector<std::uint64_t> t;
  static TowerSchedule make(std::uint64_t first, std::uint64_t limit);
};

struct LogStarParams {
  unsigned c0 = 8;            // initial A-to-D passes
  std::uint64_t n0 = 1024;    // base case below this many blocks
  std::uint64_t t1 = 4;       // first tower term
};

/// Loose compaction into 4r + ceil(r/4) blocks using O(log* n) phases of
/// thinning and region compaction.
CompactionResult loose_logstar(ClientSession& s, Region A, std::uint64_t R, LogStarParams p = {});

/// Client-side reference: distinguished cells of `cells` in input order.
std::vector<Cell> stable_filter(const std::vector<Cell>& cells);

}  // namespace oblivext
