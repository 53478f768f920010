#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "oblivext/compaction.hpp"
#include "oblivext/em_model.hpp"
#include "oblivext/selection.hpp"

/// Randomized data-oblivious external-memory sorting: quantile coloring,
/// multi-way consolidation, shuffle-and-deal distribution, recursion,
/// failure sweeping and a final tight compaction.
namespace oblivext {

/// More failed subproblems than the sweep budget allows.
class SortFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fisher-Yates permutation of the blocks of A: for i = 0..n-1 swap block i
/// with a block drawn uniformly from [i, n). Every swap is two reads and two
/// writes, also when i is drawn.
void shuffle_blocks(ClientSession& s, Region A, Tape& tape);
void shuffle_blocks(ClientSession& s, Region A);

struct DealParams {
  std::uint64_t q = 1;              // quantiles; q + 1 colors
  std::uint64_t window = 1;         // blocks read per deal step, ceil(m^{3/4})
  std::uint64_t per_color_out = 1;  // blocks written per color per step
  double c = 8;                     // deal constant

  /// q = floor(m^{1/4}), window = ceil(m^{3/4}),
  /// per_color_out = min(window, c * ceil(m^{1/2})); a color cannot fill
  /// more blocks than the window holds, so the clamp never drops data.
  static DealParams make(const MemConfig& cfg, double c = 8);
};

struct DealResult {
  std::vector<Region> C;            // one region per color, in color order
  std::uint64_t occupied_bound = 0; // per-color public bound R (cells)
  bool succeeded = true;
  std::uint64_t overflow_blocks = 0;
  bool loose_used = false;
};

/// Deals the monochromatic blocks of A (already shuffled) to q + 1 arrays:
/// each window of `window` blocks writes exactly `per_color_out` blocks to
/// every color, padding with empty blocks. Blocks past a color's quota are
/// dropped and reported. Each dealt array is then compacted to hold the
/// public per-color bound R cells: loosely (5 ceil(R/B) blocks) when the
/// loose construction applies and at least halves the array, else tightly.
DealResult deal(ClientSession& s, Region A, const DealParams& params, std::uint64_t R);

/// Number of blocks of each dealt array before compaction.
std::uint64_t dealt_blocks(std::uint64_t input_blocks, const DealParams& params);

struct SweepStats {
  std::uint64_t failed = 0;
  std::uint64_t groups = 0;
};

/// Re-sorts failed subarrays in place with a fixed access pattern. L holds
/// consecutive subarrays of `sub_blocks` blocks each. The blocks of failed
/// subarrays are routed to the front of a copy, sorted there (consecutive
/// failed subarrays as one group, each group padded-sorted across its own
/// slots), expanded back, and merged into L. Throws SortFailure before any
/// I/O when more than `budget` subarrays failed.
SweepStats failure_sweep(ClientSession& s, Region L, std::uint64_t sub_blocks,
                         const std::vector<bool>& failed, std::uint64_t budget);

struct PaddedSortParams {
  double c_deal = 8;
  double cutoff_factor = 4;       // leaves hold at most cutoff_factor * sqrt(n) blocks of items
  std::uint64_t n0_cells = 4096;  // below this many items sort directly
  unsigned max_depth = 64;
};

/// Public recursion schedule: per level the subproblem capacity (blocks) and
/// the bound on its occupied cells.
struct SortSchedule {
  struct Level {
    std::uint64_t cap_blocks = 0;
    std::uint64_t occ_bound = 0;
  };
  std::vector<Level> levels;  // levels.back() is the leaf level
  DealParams deal;
  std::uint64_t budget = 0;   // failure sweep budget, floor(n^{1/4})
  [[nodiscard]] std::uint64_t leaves() const;
  static SortSchedule make(const MemConfig& cfg, std::uint64_t blocks, PaddedSortParams p = {});
};

struct PaddedSortResult {
  Region output;                       // A.blocks blocks; occupied prefix sorted
  std::uint64_t count = 0;             // occupied cells in the output
  bool succeeded = false;
  std::uint64_t failed_subproblems = 0;
  unsigned depth = 0;
  std::uint64_t leaves = 0;
};

/// Padded sort of the occupied cells of A by (key, origin); the output keeps
/// A's capacity with the sorted items packed at the front.
PaddedSortResult padded_sort(ClientSession& s, Region A, PaddedSortParams p = {});

}  // namespace oblivext
