#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "oblivext/compaction.hpp"
#include "oblivext/em_model.hpp"

/// Data-oblivious selection of the k-th smallest cell and of q quantiles.
///
/// Ranks are 1-based over the occupied cells of the input, ordered by
/// (key, origin) so that duplicate keys still give a total order; empty cells
/// act as +infinity. Every cap and pad size is computed from the public
/// capacity N = A.blocks * B before any data is read.
namespace oblivext {

enum class SelectionStatus {
  Ok,
  SampleOverflow,   // more sampled cells than the sample capacity
  RangeOverflow,    // more cells inside the pivot range than its capacity
  RankOutsideRange, // the target rank is not inside the pivot range
  IntervalsOverlap, // quantile intervals are not disjoint
  RankUnavailable,  // fewer occupied cells than the requested rank
};

std::string_view to_string(SelectionStatus s);

struct SelectionPlan {
  std::uint64_t N = 0;            // public capacity in cells
  std::uint64_t k = 0;
  bool direct = false;            // small input: sort and read
  double sample_prob = 0;
  std::uint64_t sample_cap = 0;   // ceil(N^{1/2} + N^{3/8})
  std::uint64_t range_cap = 0;    // min(N, ceil(8 N^{7/8}))

  static SelectionPlan make(std::uint64_t N, std::uint64_t k);
  /// Pivot ranks in the sorted sample of `c` cells drawn from `n` occupied
  /// cells: rank_lo = ceil(k p - N^{3/8}), rank_hi = c - ceil((n-k) p - 2N^{3/8})
  /// with p the sample probability (k/N^{1/2} when n = N). 0 means -infinity
  /// and c + 1 means +infinity.
  [[nodiscard]] std::uint64_t rank_lo(std::uint64_t c) const;
  [[nodiscard]] std::uint64_t rank_hi(std::uint64_t c, std::uint64_t n) const;
};

/// Inputs with fewer cells than this are sorted directly.
inline constexpr std::uint64_t kDirectSelectionCells = 4096;

struct SelectResult {
  Cell value;
  bool succeeded = false;
  SelectionStatus status = SelectionStatus::Ok;
  std::uint64_t sample_count = 0;
  std::uint64_t range_count = 0;
};

SelectResult select(ClientSession& s, Region A, std::uint64_t k);

struct QuantilePlan {
  std::uint64_t N = 0;
  std::uint64_t q = 0;
  bool direct = false;            // M/B > (N/B)^{1/4}: sort and read
  double sample_prob = 0;         // N^{-1/4}
  std::uint64_t sample_cap = 0;   // ceil(N^{3/4} + N^{1/2})
  std::uint64_t interval_cap = 0; // ceil(8 N^{3/4}), clamped to N
  std::uint64_t segment_blocks = 0;

  static QuantilePlan make(const MemConfig& cfg, std::uint64_t N, std::uint64_t q);
  /// Sample ranks of the interval ends for a sample of `c` cells drawn from
  /// `n` occupied cells, with n_hat = n p:
  ///   x_i = ceil(i n_hat/(q+1) - N^{1/2}),
  ///   y_i = c - ceil(n_hat - i n_hat/(q+1) - 2 N^{1/2}).
  /// 0 / c+1 mean the global min / max.
  [[nodiscard]] std::uint64_t rank_x(std::uint64_t i, std::uint64_t c, std::uint64_t n) const;
  [[nodiscard]] std::uint64_t rank_y(std::uint64_t i, std::uint64_t c, std::uint64_t n) const;
};

struct QuantileResult {
  std::vector<Cell> values;
  bool succeeded = false;
  SelectionStatus status = SelectionStatus::Ok;
};

/// Rank of the i-th of q quantiles among n occupied cells: ceil(i n/(q+1)).
std::uint64_t quantile_rank(std::uint64_t i, std::uint64_t q, std::uint64_t n);

QuantileResult quantiles(ClientSession& s, Region A, std::uint64_t q);

}  // namespace oblivext
