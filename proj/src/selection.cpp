#include "oblivext/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "oblivext/primitives.hpp"

namespace oblivext {

namespace {

std::uint64_t ceil_pos(double x) {
  return x <= 0 ? 0 : static_cast<std::uint64_t>(std::ceil(x));
}

/// ceil(x) as a signed value, for rank formulas that may go negative.
std::int64_t ceil_signed(double x) { return static_cast<std::int64_t>(std::ceil(x)); }

/// Lower pivot rank: below 1 the pivot is absent (-infinity), above c it is
/// clamped to c.
std::uint64_t clamp_lo(std::int64_t raw, std::uint64_t c) {
  if (c == 0 || raw < 1) return 0;
  return std::min<std::uint64_t>(static_cast<std::uint64_t>(raw), c);
}

/// Upper pivot rank: above c the pivot is absent (+infinity), below 1 it is
/// clamped to 1.
std::uint64_t clamp_hi(std::int64_t raw, std::uint64_t c) {
  if (c == 0 || raw > static_cast<std::int64_t>(c)) return c + 1;
  return raw < 1 ? 1 : static_cast<std::uint64_t>(raw);
}

using Bound = std::optional<Cell>;  // nullopt stands for -inf / +inf

bool below(const Cell& c, const Bound& x) { return x && key_less(c, *x); }
bool above(const Cell& c, const Bound& y) { return y && key_less(*y, c); }

/// Copies A into a fresh region cell by cell through `f`.
template <typename F>
Region copy_scan(ClientSession& s, Region A, F&& f) {
  Region out = s.allocate(A.blocks);
  for (std::uint64_t i = 0; i < A.blocks; ++i) {
    Block b = *s.read(A.at(i));
    for (auto& c : b.cells) f(c);
    s.write(out.at(i), b);
  }
  return out;
}

/// Reads every block of a sorted region and returns the cells at the given
/// 1-based ranks among occupied cells (rank 0 or past the end yields nullopt).
std::vector<Bound> read_ranks(ClientSession& s, Region R, const std::vector<std::uint64_t>& ranks) {
  std::vector<Bound> out(ranks.size());
  std::uint64_t seen = 0;
  for (std::uint64_t i = 0; i < R.blocks; ++i) {
    auto b = s.read(R.at(i));
    for (const auto& c : b->cells) {
      if (c.empty()) continue;
      ++seen;
      for (std::size_t j = 0; j < ranks.size(); ++j) {
        if (ranks[j] == seen) out[j] = c;
      }
    }
  }
  return out;
}

/// Result cells are reported without the working marks.
Cell unmarked(Cell c) {
  c.set_distinguished(false);
  c.set_color(0);
  return c;
}

struct Extremes {
  Bound min, max;
  std::uint64_t occupied = 0;
  void add(const Cell& c) {
    ++occupied;
    if (!min || key_less(c, *min)) min = c;
    if (!max || key_less(*max, c)) max = c;
  }
};

SelectResult select_direct(ClientSession& s, Region A, std::uint64_t k) {
  SelectResult res;
  std::uint64_t n = 0;
  Region W = copy_scan(s, A, [&](Cell& c) { n += c.occupied() ? 1 : 0; });
  det_oblivious_sort(s, W, key_less);
  auto v = read_ranks(s, W, {k});
  if (k > n || !v[0]) {
    res.status = SelectionStatus::RankUnavailable;
    return res;
  }
  res.value = unmarked(*v[0]);
  res.succeeded = true;
  return res;
}

}  // namespace

std::string_view to_string(SelectionStatus s) {
  switch (s) {
    case SelectionStatus::Ok: return "ok";
    case SelectionStatus::SampleOverflow: return "sample-overflow";
    case SelectionStatus::RangeOverflow: return "range-overflow";
    case SelectionStatus::RankOutsideRange: return "rank-outside-range";
    case SelectionStatus::IntervalsOverlap: return "intervals-overlap";
    case SelectionStatus::RankUnavailable: return "rank-unavailable";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

SelectionPlan SelectionPlan::make(std::uint64_t N, std::uint64_t k) {
  if (k < 1 || k > N) throw PreconditionViolation("select requires 1 <= k <= N");
  SelectionPlan p;
  p.N = N;
  p.k = k;
  p.direct = N < kDirectSelectionCells;
  const double n = static_cast<double>(N);
  p.sample_prob = 1.0 / std::sqrt(n);
  p.sample_cap = ceil_pos(std::sqrt(n) + std::pow(n, 3.0 / 8.0));
  p.range_cap = std::min<std::uint64_t>(N, ceil_pos(8.0 * std::pow(n, 7.0 / 8.0)));
  return p;
}

std::uint64_t SelectionPlan::rank_lo(std::uint64_t c) const {
  const double n = static_cast<double>(N);
  return clamp_lo(ceil_signed(static_cast<double>(k) * sample_prob - std::pow(n, 3.0 / 8.0)), c);
}

std::uint64_t SelectionPlan::rank_hi(std::uint64_t c, std::uint64_t n_occ) const {
  const double n = static_cast<double>(N);
  const double above_k = n_occ > k ? static_cast<double>(n_occ - k) : 0.0;
  const std::int64_t gap = ceil_signed(above_k * sample_prob - 2.0 * std::pow(n, 3.0 / 8.0));
  return clamp_hi(static_cast<std::int64_t>(c) - gap, c);
}

SelectResult select(ClientSession& s, Region A, std::uint64_t k) {
  const SelectionPlan plan = SelectionPlan::make(A.blocks * s.B(), k);
  ScratchScope scope(s);
  if (plan.direct) return select_direct(s, A, k);

  SelectResult res;
  Tape& tape = s.tape();

  // (1) sample, and find the global extremes x'' / y'' in the same scan.
  Extremes ext;
  Region S = copy_scan(s, A, [&](Cell& c) {
    const bool pick = tape.coin(plan.sample_prob);
    if (c.empty()) return;
    ext.add(c);
    c.set_distinguished(pick);
  });

  // (2)-(3) compact the sample and sort it.
  CompactionResult C = compact_tight(s, S, plan.sample_cap);
  res.sample_count = C.count;
  det_oblivious_sort(s, C.output, key_less);

  // (4) pivots from the sorted sample.
  const std::uint64_t c = std::min(C.count, plan.sample_cap);
  const std::uint64_t lo = plan.rank_lo(c);
  const std::uint64_t hi = plan.rank_hi(c, ext.occupied);
  auto piv = read_ranks(s, C.output, {lo, hi});
  Bound x = piv[0], y = piv[1];

  // (5) x = max(x', x''), y = min(y', y'').
  if (ext.min && (!x || key_less(*x, *ext.min))) x = ext.min;
  if (ext.max && (!y || key_less(*ext.max, *y))) y = ext.max;

  // (6) mark the cells inside [x, y] and count those below x.
  std::uint64_t less = 0, inside = 0;
  Region T = copy_scan(s, A, [&](Cell& cell) {
    if (cell.empty()) return;
    const bool in = !below(cell, x) && !above(cell, y);
    less += below(cell, x) ? 1 : 0;
    inside += in ? 1 : 0;
    cell.set_distinguished(in);
  });
  res.range_count = inside;

  // (7)-(8) compact the range, sort it, read rank k - r(x) + 1.
  CompactionResult D = compact_tight(s, T, plan.range_cap);
  det_oblivious_sort(s, D.output, key_less);
  const std::uint64_t target = (k > less && k <= less + inside) ? k - less : 0;
  auto v = read_ranks(s, D.output, {target});

  if (k > ext.occupied) {
    res.status = SelectionStatus::RankUnavailable;
  } else if (!C.succeeded || C.count > plan.sample_cap) {
    res.status = SelectionStatus::SampleOverflow;
  } else if (target == 0) {
    res.status = SelectionStatus::RankOutsideRange;
  } else if (!D.succeeded || inside > plan.range_cap) {
    res.status = SelectionStatus::RangeOverflow;
  } else if (v[0]) {
    res.value = unmarked(*v[0]);
    res.succeeded = true;
  } else {
    res.status = SelectionStatus::RankOutsideRange;
  }
  return res;
}

// ---------------------------------------------------------------------------
// quantiles
// ---------------------------------------------------------------------------

std::uint64_t quantile_rank(std::uint64_t i, std::uint64_t q, std::uint64_t n) {
  return std::max<std::uint64_t>(1, ceil_div(i * n, q + 1));
}

QuantilePlan QuantilePlan::make(const MemConfig& cfg, std::uint64_t N, std::uint64_t q) {
  const std::uint64_t m = cfg.m();
  if (q < 1) throw PreconditionViolation("quantiles requires q >= 1");
  if (q > m || q * q > m || q * q * q * q > m) {
    throw PreconditionViolation("quantiles requires q <= (M/B)^{1/4}");
  }
  if (2 * q + 1 > cfg.M) throw PreconditionViolation("quantiles requires 2q+1 counters <= M");
  QuantilePlan p;
  p.N = N;
  p.q = q;
  const double n = static_cast<double>(N);
  const double nb = static_cast<double>(ceil_div(N, cfg.B));
  p.direct = static_cast<double>(m) > std::pow(nb, 0.25) || N < kDirectSelectionCells;
  p.sample_prob = std::pow(n, -0.25);
  p.sample_cap = ceil_pos(std::pow(n, 0.75) + std::sqrt(n));
  p.interval_cap = std::min<std::uint64_t>(N, ceil_pos(8.0 * std::pow(n, 0.75)));
  p.segment_blocks = ceil_div(p.interval_cap, cfg.B);
  return p;
}

std::uint64_t QuantilePlan::rank_x(std::uint64_t i, std::uint64_t c, std::uint64_t n_occ) const {
  const double n_hat = static_cast<double>(n_occ) * sample_prob;
  const double raw = static_cast<double>(i) * n_hat / static_cast<double>(q + 1) - std::sqrt(static_cast<double>(N));
  return clamp_lo(ceil_signed(raw), c);
}

std::uint64_t QuantilePlan::rank_y(std::uint64_t i, std::uint64_t c, std::uint64_t n_occ) const {
  const double n_hat = static_cast<double>(n_occ) * sample_prob;
  const double gap = n_hat - static_cast<double>(i) * n_hat / static_cast<double>(q + 1) -
                     2.0 * std::sqrt(static_cast<double>(N));
  return clamp_hi(static_cast<std::int64_t>(c) - ceil_signed(gap), c);
}

QuantileResult quantiles(ClientSession& s, Region A, std::uint64_t q) {
  const std::uint64_t B = s.B();
  const QuantilePlan plan = QuantilePlan::make(s.cfg(), A.blocks * B, q);
  ScratchScope scope(s);
  QuantileResult res;
  res.values.resize(q);

  if (plan.direct) {
    std::uint64_t n = 0;
    Region W = copy_scan(s, A, [&](Cell& c) { n += c.occupied() ? 1 : 0; });
    det_oblivious_sort(s, W, key_less);
    std::vector<std::uint64_t> ranks(q);
    for (std::uint64_t i = 0; i < q; ++i) ranks[i] = n == 0 ? 0 : quantile_rank(i + 1, q, n);
    auto v = read_ranks(s, W, ranks);
    res.succeeded = true;
    for (std::uint64_t i = 0; i < q; ++i) {
      if (v[i]) {
        res.values[i] = unmarked(*v[i]);
      } else {
        res.succeeded = false;
        res.status = SelectionStatus::RankUnavailable;
      }
    }
    return res;
  }

  Tape& tape = s.tape();
  Extremes ext;
  Region S = copy_scan(s, A, [&](Cell& c) {
    const bool pick = tape.coin(plan.sample_prob);
    if (c.empty()) return;
    ext.add(c);
    c.set_distinguished(pick);
  });
  CompactionResult C = compact_tight(s, S, plan.sample_cap);
  det_oblivious_sort(s, C.output, key_less);

  const std::uint64_t c = std::min(C.count, plan.sample_cap);
  std::vector<std::uint64_t> ranks;
  for (std::uint64_t i = 1; i <= q; ++i) {
    ranks.push_back(plan.rank_x(i, c, ext.occupied));
    ranks.push_back(plan.rank_y(i, c, ext.occupied));
  }
  auto piv = read_ranks(s, C.output, ranks);
  std::vector<Bound> xs(q), ys(q);
  for (std::uint64_t i = 0; i < q; ++i) {
    xs[i] = piv[2 * i] ? piv[2 * i] : ext.min;
    ys[i] = piv[2 * i + 1] ? piv[2 * i + 1] : ext.max;
  }
  bool disjoint = true;
  for (std::uint64_t i = 0; i < q; ++i) {
    if (xs[i] && ys[i] && key_less(*ys[i], *xs[i])) disjoint = false;
    if (i + 1 < q && ys[i] && xs[i + 1] && !key_less(*ys[i], *xs[i + 1])) disjoint = false;
  }

  // Mark interval membership (color i+1) and keep the between/inside
  // counters in cache.
  auto counters = s.reserve(2 * q + 1);
  std::vector<std::uint64_t> inside(q, 0), between(q + 1, 0);
  Region T = copy_scan(s, A, [&](Cell& cell) {
    if (cell.empty()) return;
    std::uint64_t gap = 0;
    for (std::uint64_t i = 0; i < q; ++i) {
      if (!below(cell, xs[i]) && !above(cell, ys[i])) {
        cell.set_distinguished(true);
        cell.set_color(static_cast<std::uint32_t>(i + 1));
        ++inside[i];
        return;
      }
      if (above(cell, ys[i])) gap = i + 1;
    }
    cell.set_distinguished(false);
    ++between[gap];
  });

  // Compact all interval members, then pad every interval with dummies to a
  // fixed segment and sort by (color, key) so segment i is interval i.
  const std::uint64_t seg_cells = plan.segment_blocks * B;
  const std::uint64_t total_cells = q * seg_cells;
  CompactionResult D = compact_tight(s, T, q * plan.interval_cap);
  Region E = s.allocate(2 * q * plan.segment_blocks);
  const std::uint64_t half = q * plan.segment_blocks;
  for (std::uint64_t i = 0; i < half; ++i) {
    Block b = i < D.output.blocks ? *s.read(D.output.at(i)) : Block{};
    b.cells.resize(B);
    b.meta = {};
    s.write(E.at(i), b);
  }
  {
    std::uint32_t color = 1;
    std::uint64_t left = q > 0 ? (inside[0] <= seg_cells ? seg_cells - inside[0] : 0) : 0;
    std::uint64_t serial = 0;
    Block b;
    b.cells.resize(B);
    for (std::uint64_t i = 0; i < half; ++i) {
      for (auto& cell : b.cells) {
        while (left == 0 && color < q) {
          ++color;
          left = inside[color - 1] <= seg_cells ? seg_cells - inside[color - 1] : 0;
        }
        if (left > 0) {
          cell = Cell::item(std::numeric_limits<std::int64_t>::max(), 0,
                            std::numeric_limits<std::uint64_t>::max() - serial++, false, color);
          --left;
        } else {
          cell = Cell{};
        }
      }
      s.write(E.at(half + i), b);
    }
  }
  det_oblivious_sort(s, E, [](const Cell& a, const Cell& b) {
    if (a.empty()) return false;
    if (b.empty()) return true;
    if (a.color() != b.color()) return a.color() < b.color();
    return key_less(a, b);
  });

  bool ok = C.succeeded && C.count <= plan.sample_cap && D.succeeded && disjoint && total_cells > 0;
  if (!(C.succeeded && C.count <= plan.sample_cap)) res.status = SelectionStatus::SampleOverflow;
  else if (!disjoint) res.status = SelectionStatus::IntervalsOverlap;
  for (std::uint64_t i = 0; i < q; ++i) {
    if (inside[i] > plan.interval_cap) {
      ok = false;
      if (res.status == SelectionStatus::Ok) res.status = SelectionStatus::RangeOverflow;
    }
  }

  // Per-interval selection at the rank derived from the counters.
  std::uint64_t before = between[0];
  for (std::uint64_t i = 0; i < q; ++i) {
    const std::uint64_t K = quantile_rank(i + 1, q, ext.occupied);
    const bool in = K > before && K <= before + inside[i];
    const std::uint64_t k_i = in ? K - before : 1;
    if (!in) {
      ok = false;
      if (res.status == SelectionStatus::Ok) res.status = SelectionStatus::RankOutsideRange;
    }
    SelectResult r = select(s, E.sub(i * plan.segment_blocks, plan.segment_blocks), k_i);
    if (r.succeeded) {
      res.values[i] = r.value;
    } else {
      ok = false;
      if (res.status == SelectionStatus::Ok) res.status = r.status;
    }
    before += inside[i] + between[i + 1];
  }
  res.succeeded = ok;
  return res;
}

}  // namespace oblivext
