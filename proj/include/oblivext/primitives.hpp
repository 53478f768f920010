#pragma once

#include <cstdint>
#include <functional>

#include "oblivext/em_model.hpp"

/// Data-oblivious building blocks shared by the compaction, selection and
/// sorting algorithms. Every routine here touches addresses that depend only
/// on region sizes, cache size and the random tape.
namespace oblivext {

using CellPredicate = std::function<bool(const Cell&)>;
using CellLess = std::function<bool(const Cell&, const Cell&)>;
using BlockLess = std::function<bool(const Block&, const Block&)>;

inline bool is_distinguished(const Cell& c) { return c.distinguished(); }
inline bool is_occupied(const Cell& c) { return c.occupied(); }

/// Orders cells by origin index, empties last.
inline bool origin_less(const Cell& a, const Cell& b) {
  if (a.empty()) return false;
  if (b.empty()) return true;
  return a.origin() < b.origin();
}

// ---------------------------------------------------------------------------
// Consolidation
// ---------------------------------------------------------------------------

struct ConsolidateResult {
  Region out;
  std::uint64_t count = 0;  // cells kept (client-side)
};

/// Single scan that packs the cells satisfying `keep` into blocks that are
/// either full or empty, except possibly the last non-empty one. Order of kept
/// cells is preserved; other cells are dropped. Output has A.blocks blocks.
ConsolidateResult consolidate(ClientSession& s, Region A, const CellPredicate& keep = is_distinguished);

struct MultiwayResult {
  Region out;                            // A.blocks + 2*colors blocks
  std::vector<std::uint64_t> per_color;  // cells of each color 1..colors
};

/// Packs cells by color (1..colors; color 0 and empties are dropped) so that
/// every output block is monochromatic. Writes one block per block read
/// (a full group if one exists, else an empty block), then a fixed tail of
/// 2*colors blocks holding the leftovers, at most one partial block per color.
MultiwayResult consolidate_multiway(ClientSession& s, Region A, std::uint32_t colors);

// ---------------------------------------------------------------------------
// Thinning
// ---------------------------------------------------------------------------

struct ThinningStats {
  std::uint64_t placed = 0;
  std::uint64_t attempted = 0;  // non-empty A blocks seen
};

/// A-to-C thinning pass at block granularity. For each block of A: draw a
/// uniform C slot from `tape`, read A[i], read C[j], move A[i] into C[j] when
/// C[j] is empty and A[i] is not, write C[j] and A[i] back. A moved block is
/// cleared in A, which is its "already written" mark.
ThinningStats thinning_pass(ClientSession& s, Region A, Region C, Tape& tape);

// ---------------------------------------------------------------------------
// Deterministic oblivious sort
// ---------------------------------------------------------------------------

/// Block-granular Batcher odd-even merge sort. Units of g blocks (g the
/// largest power of two with 2g blocks fitting in free cache) are first
/// sorted in cache, then merge-split along the network. The comparator must
/// order empty cells last when a packed prefix is wanted; `key_less` does.
void det_oblivious_sort(ClientSession& s, Region A, const CellLess& less = key_less);

/// Same network where the items are whole blocks.
void det_oblivious_sort_blocks(ClientSession& s, Region A, const BlockLess& less);

/// Comparator count of the network for `units` units (for I/O accounting).
std::uint64_t odd_even_comparators(std::uint64_t units);

// ---------------------------------------------------------------------------
// Butterfly routing
// ---------------------------------------------------------------------------

/// Marks blocks as occupied (label = distance to move left, aux = same) or
/// vacant (label = -1) in one left-to-right scan. An occupied block at
/// position j with rank r among occupied blocks gets label j - r.
std::uint64_t compute_distance_labels(ClientSession& s, Region A,
                                      const std::function<bool(const Block&)>& occupied);
std::uint64_t compute_distance_labels(ClientSession& s, Region A);

struct RouteStats {
  unsigned levels = 0;
  unsigned levels_per_pass = 0;
  std::uint64_t passes = 0;
  std::uint64_t moved = 0;
  std::uint64_t level_checks = 0;
  std::uint64_t collisions = 0;
};

/// In-place compaction through the butterfly-like network: at level i an
/// occupied block moves from j to j - (d mod 2^(i+1)). Levels are executed in
/// groups that fit the cache; each group is one strided streaming pass per
/// residue class. Throws InvalidLabels if two blocks meet at any level.
RouteStats butterfly_route(ClientSession& s, Region A);

/// Reverse network: an occupied block at j moves right by its label. Labels
/// must be non-decreasing over occupied blocks and fit inside A.
RouteStats butterfly_expand_in_place(ClientSession& s, Region A);

/// Copies D into the prefix of a fresh region of `target_blocks` blocks and
/// expands it there.
Region butterfly_expand(ClientSession& s, Region D, std::uint64_t target_blocks,
                        RouteStats* stats = nullptr);

}  // namespace oblivext
