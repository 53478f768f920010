#include "oblivext/obsort.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "oblivext/primitives.hpp"

namespace oblivext {

namespace {

Block empty_block(std::uint64_t B) {
  Block b;
  b.cells.resize(B);
  return b;
}

/// Color of a monochromatic block: that of its first occupied cell, 0 if empty.
std::uint32_t block_color(const Block& b) {
  for (const auto& c : b.cells) {
    if (c.occupied()) return c.color();
  }
  return 0;
}

/// Whether a dealt array of `blocks` blocks is compacted loosely: the loose
/// construction must apply (R < N/4 and the wide-block/tall-cache
/// assumptions) and its 5 ceil(R/B) output blocks must at least halve the
/// array. Otherwise a tight compaction to ceil(R/B) blocks is used.
bool use_loose(const MemConfig& cfg, std::uint64_t blocks, std::uint64_t R) {
  const std::uint64_t cells = blocks * cfg.B;
  if (R == 0 || 4 * R >= cells) return false;
  if (2 * loose_capacity_blocks(R, cfg.B) > blocks) return false;
  try {
    cfg.require_wide_block_tall_cache(cells, "loose");
  } catch (const PreconditionViolation&) {
    return false;
  }
  return true;
}

std::uint64_t compacted_blocks(const MemConfig& cfg, std::uint64_t blocks, std::uint64_t R) {
  return use_loose(cfg, blocks, R) ? loose_capacity_blocks(R, cfg.B) : tight_capacity_blocks(R, cfg.B);
}

}  // namespace

// ---------------------------------------------------------------------------
// Shuffle and deal
// ---------------------------------------------------------------------------

void shuffle_blocks(ClientSession& s, Region A, Tape& tape) {
  const std::uint64_t n = A.blocks;
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t j = i + tape.below(n - i);
    auto a = s.read(A.at(i));
    auto b = s.read(A.at(j));
    s.write(A.at(i), *b);
    s.write(A.at(j), *a);
  }
}

void shuffle_blocks(ClientSession& s, Region A) { shuffle_blocks(s, A, s.tape()); }

DealParams DealParams::make(const MemConfig& cfg, double c) {
  const double m = static_cast<double>(cfg.m());
  DealParams p;
  p.c = c;
  p.q = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::floor(std::pow(m, 0.25) + 1e-9)));
  while (p.q > 1 && p.q * p.q * p.q * p.q > cfg.m()) --p.q;
  p.window = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(std::pow(m, 0.75) - 1e-9)));
  const auto quota = static_cast<std::uint64_t>(std::ceil(c * std::ceil(std::sqrt(m) - 1e-9)));
  p.per_color_out = std::max<std::uint64_t>(1, std::min(p.window, quota));
  return p;
}

std::uint64_t dealt_blocks(std::uint64_t input_blocks, const DealParams& params) {
  return ceil_div(input_blocks, params.window) * params.per_color_out;
}

DealResult deal(ClientSession& s, Region A, const DealParams& params, std::uint64_t R) {
  const std::uint64_t B = s.B();
  const std::uint64_t colors = params.q + 1;
  s.cfg().require_cache_blocks(params.window + 1, "deal");
  DealResult res;
  res.occupied_bound = R;
  const std::uint64_t out_blocks = dealt_blocks(A.blocks, params);
  std::vector<Region> raw;
  for (std::uint64_t i = 0; i < colors; ++i) raw.push_back(s.allocate(out_blocks));

  const Block blank = empty_block(B);
  const std::uint64_t windows = ceil_div(A.blocks, params.window);
  for (std::uint64_t w = 0; w < windows; ++w) {
    std::vector<CachedBlock> held;
    const std::uint64_t first = w * params.window;
    const std::uint64_t last = std::min(A.blocks, first + params.window);
    for (std::uint64_t i = first; i < last; ++i) held.push_back(s.read(A.at(i)));
    std::vector<std::vector<const Block*>> groups(colors);
    for (const auto& h : held) {
      const std::uint32_t c = block_color(*h);
      if (c >= 1 && c <= colors) groups[c - 1].push_back(&*h);
    }
    for (std::uint64_t i = 0; i < colors; ++i) {
      if (groups[i].size() > params.per_color_out) {
        res.overflow_blocks += groups[i].size() - params.per_color_out;
        res.succeeded = false;
      }
      for (std::uint64_t j = 0; j < params.per_color_out; ++j) {
        s.write(raw[i].at(w * params.per_color_out + j), j < groups[i].size() ? *groups[i][j] : blank);
      }
    }
  }

  res.loose_used = use_loose(s.cfg(), out_blocks, R);
  for (std::uint64_t i = 0; i < colors; ++i) {
    CompactionResult c = res.loose_used ? loose(s, raw[i], R) : compact_tight(s, raw[i], R);
    res.succeeded = res.succeeded && c.succeeded;
    res.C.push_back(c.output);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Failure sweeping
// ---------------------------------------------------------------------------

SweepStats failure_sweep(ClientSession& s, Region L, std::uint64_t sub_blocks,
                         const std::vector<bool>& failed, std::uint64_t budget) {
  const std::uint64_t B = s.B();
  if (sub_blocks == 0 || L.blocks % sub_blocks != 0 || failed.size() != L.blocks / sub_blocks) {
    throw PreconditionViolation("failure_sweep requires L to hold whole subarrays");
  }
  SweepStats st;
  st.failed = static_cast<std::uint64_t>(std::count(failed.begin(), failed.end(), true));
  if (st.failed > budget) throw SortFailure("more failed subproblems than the sweep budget");
  if (budget == 0) return st;

  ScratchScope scope(s);
  const std::uint64_t subs = failed.size();
  // Group id per failed subarray: consecutive failed subarrays share a group.
  std::vector<std::uint64_t> group(subs, 0), rank(subs, 0);
  std::vector<std::uint64_t> slot_origin;  // D slot -> subarray index
  for (std::uint64_t j = 0; j < subs; ++j) {
    if (!failed[j]) continue;
    if (j == 0 || !failed[j - 1]) ++st.groups;
    group[j] = st.groups;
    rank[j] = slot_origin.size();
    slot_origin.push_back(j);
  }

  // Route the blocks of failed subarrays to the front of a copy W.
  const Region W = s.allocate(L.blocks);
  for (std::uint64_t p = 0; p < L.blocks; ++p) {
    Block b = *s.read(L.at(p));
    const std::uint64_t j = p / sub_blocks;
    if (failed[j]) {
      const auto dest = static_cast<std::int64_t>(rank[j] * sub_blocks + p % sub_blocks);
      b.meta.label = static_cast<std::int64_t>(p) - dest;
      b.meta.aux = b.meta.label;
    } else {
      b.clear();
      b.meta.label = -1;
      b.meta.aux = -1;
    }
    s.write(W.at(p), b);
  }
  butterfly_route(s, W);

  // Sort the first budget slots by (group, empties last, key); unused slots
  // sort after every group.
  const Region D = W.sub(0, std::min(L.blocks, budget * sub_blocks));
  const std::uint64_t used = slot_origin.size() * sub_blocks;
  constexpr std::uint64_t kUnused = std::numeric_limits<std::uint64_t>::max();
  for (std::uint64_t j = 0; j < D.blocks; ++j) {
    Block b = *s.read(D.at(j));
    if (j >= used) b.clear();
    const std::uint64_t g = j < used ? group[slot_origin[j / sub_blocks]] : kUnused;
    for (auto& c : b.cells) c.set_tag(g);
    b.meta = {};
    s.write(D.at(j), b);
  }
  det_oblivious_sort(s, D, [](const Cell& a, const Cell& b) {
    if (a.tag() != b.tag()) return a.tag() < b.tag();
    return key_less(a, b);
  });

  // Label the sorted slots with their distance back home and expand.
  const Region E = s.allocate(L.blocks);
  Block vacant = empty_block(B);
  vacant.meta.label = -1;
  vacant.meta.aux = -1;
  for (std::uint64_t j = 0; j < L.blocks; ++j) {
    if (j >= D.blocks) {
      s.write(E.at(j), vacant);
      continue;
    }
    Block b = *s.read(D.at(j));
    for (auto& c : b.cells) c.set_tag(0);
    if (j < used) {
      const std::uint64_t home = slot_origin[j / sub_blocks] * sub_blocks + j % sub_blocks;
      b.meta.label = static_cast<std::int64_t>(home - j);
      b.meta.aux = b.meta.label;
    } else {
      b.clear();
      b.meta.label = -1;
      b.meta.aux = -1;
    }
    s.write(E.at(j), b);
  }
  butterfly_expand_in_place(s, E);

  // Merge: failed subarrays take the expanded blocks.
  for (std::uint64_t p = 0; p < L.blocks; ++p) {
    auto orig = s.read(L.at(p));
    auto swept = s.read(E.at(p));
    Block out = failed[p / sub_blocks] ? *swept : *orig;
    out.meta = {};
    s.write(L.at(p), out);
  }
  return st;
}

// ---------------------------------------------------------------------------
// Padded sort
// ---------------------------------------------------------------------------

std::uint64_t SortSchedule::leaves() const {
  std::uint64_t n = 1;
  for (std::size_t i = 1; i < levels.size(); ++i) n *= deal.q + 1;
  return n;
}

SortSchedule SortSchedule::make(const MemConfig& cfg, std::uint64_t blocks, PaddedSortParams p) {
  SortSchedule sch;
  sch.deal = DealParams::make(cfg, p.c_deal);
  const double n = static_cast<double>(std::max<std::uint64_t>(blocks, 1));
  sch.budget = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::floor(std::pow(n, 0.25) + 1e-9)));
  const auto cutoff = std::max<std::uint64_t>(
      p.n0_cells, static_cast<std::uint64_t>(std::ceil(p.cutoff_factor * std::sqrt(n))) * cfg.B);
  const std::uint64_t colors = sch.deal.q + 1;
  sch.levels.push_back({blocks, blocks * cfg.B});
  while (sch.levels.back().occ_bound > cutoff && sch.levels.size() <= p.max_depth) {
    const auto cur = sch.levels.back();
    const std::uint64_t occ = ceil_div(cur.occ_bound, colors);
    const std::uint64_t dealt = dealt_blocks(cur.cap_blocks + 2 * colors, sch.deal);
    sch.levels.push_back({compacted_blocks(cfg, dealt, occ), occ});
  }
  return sch;
}

namespace {

struct SortRun {
  ClientSession& s;
  const SortSchedule& sch;
  Region leaves;
  std::vector<bool> failed;
  bool lost = false;

  std::uint64_t leaves_below(std::size_t level) const {
    std::uint64_t n = 1;
    for (std::size_t i = level + 1; i < sch.levels.size(); ++i) n *= sch.deal.q + 1;
    return n;
  }

  void node(Region X, std::size_t level, std::uint64_t first_leaf) {
    const std::uint64_t leaf_blocks = sch.levels.back().cap_blocks;
    if (level + 1 == sch.levels.size()) {
      const Region slot = leaves.sub(first_leaf * leaf_blocks, leaf_blocks);
      for (std::uint64_t i = 0; i < leaf_blocks; ++i) {
        Block b = *s.read(X.at(i));
        b.meta = {};
        s.write(slot.at(i), b);
      }
      det_oblivious_sort(s, slot, key_less);
      return;
    }
    ScratchScope scope(s);
    const std::uint64_t q = sch.deal.q;
    const QuantileResult qr = quantiles(s, X, q);
    // A subproblem without items has no quantiles and nothing to misplace.
    bool ok = qr.succeeded || qr.status == SelectionStatus::RankUnavailable;

    // Color every item by its quantile bucket and mark it for compaction.
    const Region Y = s.allocate(X.blocks);
    for (std::uint64_t i = 0; i < X.blocks; ++i) {
      Block b = *s.read(X.at(i));
      for (auto& c : b.cells) {
        if (c.empty()) continue;
        std::uint32_t color = 1;
        for (const auto& v : qr.values) {
          if (qr.succeeded && key_less(v, c)) ++color;
        }
        c.set_color(color);
        c.set_distinguished(true);
      }
      b.meta = {};
      s.write(Y.at(i), b);
    }
    const MultiwayResult mw = consolidate_multiway(s, Y, static_cast<std::uint32_t>(q + 1));
    shuffle_blocks(s, mw.out);
    const DealResult dr = deal(s, mw.out, sch.deal, sch.levels[level + 1].occ_bound);
    if (!dr.succeeded) {
      ok = false;
      lost = true;
    }
    const std::uint64_t per_child = leaves_below(level + 1);
    for (std::uint64_t c = 0; c <= q; ++c) node(dr.C[c], level + 1, first_leaf + c * per_child);
    if (!ok) {
      const std::uint64_t span = leaves_below(level);
      for (std::uint64_t j = first_leaf; j < first_leaf + span; ++j) failed[j] = true;
    }
  }
};

}  // namespace

PaddedSortResult padded_sort(ClientSession& s, Region A, PaddedSortParams p) {
  const std::uint64_t B = s.B();
  const SortSchedule sch = SortSchedule::make(s.cfg(), A.blocks, p);
  PaddedSortResult res;
  res.output = s.allocate(A.blocks);
  res.depth = static_cast<unsigned>(sch.levels.size() - 1);
  res.leaves = sch.leaves();
  ScratchScope scope(s);

  std::uint64_t input_count = 0;
  SortRun run{s, sch, s.allocate(res.leaves * sch.levels.back().cap_blocks),
              std::vector<bool>(res.leaves, false)};
  // The root works on a copy so that A is left untouched.
  const Region X = s.allocate(A.blocks);
  for (std::uint64_t i = 0; i < A.blocks; ++i) {
    Block b = *s.read(A.at(i));
    for (auto& c : b.cells) {
      if (c.empty()) continue;
      ++input_count;
      c.set_distinguished(false);
      c.set_color(0);
    }
    b.meta = {};
    s.write(X.at(i), b);
  }
  run.node(X, 0, 0);

  // Sweep at most `budget` failed leaves; the sweep's access pattern does not
  // depend on which or how many leaves failed.
  res.failed_subproblems = static_cast<std::uint64_t>(std::count(run.failed.begin(), run.failed.end(), true));
  std::vector<bool> sweep = run.failed;
  std::uint64_t kept = 0;
  for (auto&& f : sweep) {
    if (f && ++kept > sch.budget) f = false;
  }
  failure_sweep(s, run.leaves, sch.levels.back().cap_blocks, sweep, sch.budget);

  // Final tight order-preserving compaction of every occupied cell.
  const Region Z = s.allocate(run.leaves.blocks);
  for (std::uint64_t i = 0; i < run.leaves.blocks; ++i) {
    Block b = *s.read(run.leaves.at(i));
    for (auto& c : b.cells) {
      if (c.occupied()) c.set_distinguished(true);
    }
    s.write(Z.at(i), b);
  }
  const CompactionResult packed = tight_dense(s, Z);
  for (std::uint64_t i = 0; i < A.blocks; ++i) {
    Block b = i < packed.output.blocks ? *s.read(packed.output.at(i)) : empty_block(B);
    for (auto& c : b.cells) {
      if (c.empty()) continue;
      ++res.count;
      c.set_distinguished(false);
      c.set_color(0);
    }
    b.meta = {};
    s.write(res.output.at(i), b);
  }
  res.succeeded = !run.lost && res.failed_subproblems <= sch.budget && res.count == input_count;
  return res;
}

}  // namespace oblivext
