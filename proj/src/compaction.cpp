#include "oblivext/compaction.hpp"

#include <cmath>

namespace oblivext {

namespace {

Block empty_block(std::uint64_t B) {
  Block b;
  b.cells.resize(B);
  return b;
}

// I/O count of det_oblivious_sort on `blocks` blocks with `free` spare cache blocks.
std::uint64_t sort_ios(std::uint64_t blocks, std::uint64_t free) {
  if (blocks <= free) return 2 * blocks;
  const std::uint64_t g = pow2_floor(free / 2);
  const std::uint64_t units = ceil_div(blocks, g);
  return 2 * blocks + odd_even_comparators(units) * 4 * g;
}

std::uint64_t table_rows(std::uint64_t rb, TightSparseParams p) {
  const auto rows = static_cast<std::uint64_t>(std::ceil(p.table_factor * static_cast<double>(rb)));
  return ceil_div(std::max<std::uint64_t>(rows, p.k), p.k) * p.k;
}

// Copies the first `count` blocks of `src` (padding with empties past its
// end) into `dst`; returns the occupied cells of src blocks beyond `count`,
// which are read so the scan length does not depend on them.
std::uint64_t copy_prefix(ClientSession& s, Region src, Region dst, std::uint64_t count) {
  std::uint64_t dropped = 0;
  for (std::uint64_t p = 0; p < std::max(src.blocks, count); ++p) {
    if (p < src.blocks) {
      auto b = s.read(src.at(p));
      if (p < count) {
        b->meta = {};
        s.write(dst.at(p), *b);
      } else {
        dropped += b->occupied_count();
      }
    } else {
      s.write(dst.at(p), empty_block(s.B()));
    }
  }
  return dropped;
}

void fail(CompactionResult& res, CompactionStatus st) {
  if (res.succeeded) res.status = st;
  res.succeeded = false;
}

double log_base(double x, double base) { return std::log(x) / std::log(base); }

}  // namespace

std::string_view to_string(CompactionStatus s) {
  switch (s) {
    case CompactionStatus::Ok: return "ok";
    case CompactionStatus::CapacityExceeded: return "capacity-exceeded";
    case CompactionStatus::DecodeFailure: return "decode-failure";
    case CompactionStatus::RegionOverflow: return "region-overflow";
    case CompactionStatus::ResidueOverflow: return "residue-overflow";
    case CompactionStatus::PhaseInvariant: return "phase-invariant";
  }
  return "unknown";
}

std::uint64_t tight_capacity_blocks(std::uint64_t R, std::uint64_t B) { return ceil_div(R, B); }
std::uint64_t loose_capacity_blocks(std::uint64_t R, std::uint64_t B) { return 5 * ceil_div(R, B); }
std::uint64_t logstar_capacity_blocks(std::uint64_t R, std::uint64_t B) {
  const std::uint64_t r = ceil_div(R, B);
  return 4 * r + ceil_div(r, 4);
}

std::vector<Cell> stable_filter(const std::vector<Cell>& cells) {
  std::vector<Cell> out;
  for (const auto& c : cells) {
    if (c.distinguished()) out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tight compaction
// ---------------------------------------------------------------------------

CompactionResult tight_sparse(ClientSession& s, Region A, std::uint64_t r, TightSparseParams p) {
  s.cfg().require_cache_blocks(6, "tight_sparse");
  const std::uint64_t B = s.B();
  const std::uint64_t rb = tight_capacity_blocks(r, B);
  CompactionResult res;
  res.tight = true;
  res.order_preserving = true;
  res.capacity = r;
  res.method = "tight_sparse";
  res.output = s.allocate(rb);
  {
    ScratchScope scope(s);
    const auto cons = consolidate(s, A);
    res.count = cons.count;
    if (cons.count > r) fail(res, CompactionStatus::CapacityExceeded);
    if (rb == 0) return res;

    const auto table = IbltTable::with_rows(s, table_rows(rb, p), p.k);
    std::uint64_t nonempty = 0;
    for (std::uint64_t i = 0; i < cons.out.blocks; ++i) {
      auto b = s.read(cons.out.at(i));
      const auto key = static_cast<std::int64_t>(i);
      if (b->all_empty()) {
        iblt_touch(s, table, key);
      } else {
        ++nonempty;
        b->meta = {};
        iblt_insert(s, table, key, *b);
      }
    }
    const auto listed = iblt_oblivious_list(s, table, rb);
    if (!listed.complete || listed.extracted != nonempty) fail(res, CompactionStatus::DecodeFailure);

    // Listed blocks come out in peeling order; ordering by key (the block's
    // position after consolidation) packs them into the first blocks.
    det_oblivious_sort_blocks(s, listed.staging, [](const Block& a, const Block& b) {
      if (a.meta.label < 0) return false;
      if (b.meta.label < 0) return true;
      return a.meta.label < b.meta.label;
    });
    copy_prefix(s, listed.staging, res.output, rb);
  }
  det_oblivious_sort(s, res.output, origin_less);
  return res;
}

CompactionResult tight_dense(ClientSession& s, Region A) {
  s.cfg().require_cache_blocks(3, "tight_dense");
  CompactionResult res;
  res.tight = true;
  res.order_preserving = true;
  res.method = "tight_dense";
  const auto cons = consolidate(s, A);
  res.count = cons.count;
  res.capacity = cons.count;
  res.output = cons.out;
  compute_distance_labels(s, cons.out);
  butterfly_route(s, cons.out);
  return res;
}

TightPlan plan_tight(const ClientSession& s, std::uint64_t n, std::uint64_t r, TightSparseParams p) {
  TightPlan plan;
  const std::uint64_t B = s.cfg().B;
  const std::uint64_t free = s.cache_free_blocks();
  const std::uint64_t rb = tight_capacity_blocks(r, B);

  // Dense: consolidate, label, routing passes, prefix copy.
  const unsigned levels = n <= 1 ? 0 : ceil_log2(n);
  const std::uint64_t W = std::max<std::uint64_t>(1, pow2_floor(free / 2));
  const unsigned g = std::max(1u, floor_log2(W + 1));
  plan.dense_ios = 2 * n + 2 * n + 2 * n * ((levels + g - 1) / g) + 2 * std::max(n, rb);

  // Sparse: consolidate, inserts, listing scans, staging sort, output sort.
  if (free >= 6 && rb > 0) {
    const std::uint64_t rows = table_rows(rb, p);
    const std::uint64_t cap = (free - 2) / 2;
    const std::uint64_t rounds = oblivious_list_rounds(rows, rb, cap);
    const std::uint64_t staging = rounds * cap;
    plan.sparse_ios = 2 * n + n * (1 + 2 * p.k) + rounds * (2 * rows + cap) + 2 * rows + sort_ios(staging, free) +
                      2 * std::max(staging, rb) + sort_ios(rb, free);
    const double seg = static_cast<double>(rows / p.k);
    const double pairs = 0.5 * static_cast<double>(rb) * static_cast<double>(rb - 1);
    plan.sparse_failure_bound = std::min(1.0, pairs * std::pow(seg, -static_cast<double>(p.k)));
  } else {
    plan.sparse_ios = UINT64_MAX;
  }
  const double budget = std::pow(static_cast<double>(std::max<std::uint64_t>(n, 2)), -static_cast<double>(s.cfg().d));
  plan.use_sparse = plan.sparse_ios <= plan.dense_ios && plan.sparse_failure_bound <= budget;
  return plan;
}

CompactionResult compact_tight(ClientSession& s, Region A, std::uint64_t r, TightSparseParams p) {
  const TightPlan plan = plan_tight(s, A.blocks, r, p);
  if (plan.use_sparse) return tight_sparse(s, A, r, p);

  const std::uint64_t rb = tight_capacity_blocks(r, s.B());
  CompactionResult res;
  res.tight = true;
  res.order_preserving = true;
  res.capacity = r;
  res.method = "tight_dense";
  res.output = s.allocate(rb);
  ScratchScope scope(s);
  const auto dense = tight_dense(s, A);
  res.count = dense.count;
  copy_prefix(s, dense.output, res.output, rb);
  if (dense.count > r) fail(res, CompactionStatus::CapacityExceeded);
  return res;
}

// ---------------------------------------------------------------------------
// Loose compaction
// ---------------------------------------------------------------------------

CompactionResult loose(ClientSession& s, Region A, std::uint64_t R, LooseParams p) {
  const std::uint64_t B = s.B();
  const std::uint64_t n = A.blocks;
  const std::uint64_t N = n * B;
  if (4 * R >= N && R > 0) throw PreconditionViolation("loose compaction requires R < N/4");
  s.cfg().require_wide_block_tall_cache(N, "loose");
  s.cfg().require_cache_blocks(2, "loose");
  const unsigned c1 = p.c1 != 0 ? p.c1 : s.cfg().d + 2;
  const std::uint64_t r = ceil_div(R, B);

  CompactionResult res;
  res.capacity = loose_capacity_blocks(R, B) * B;
  res.method = "loose";
  res.output = s.allocate(5 * r);
  const Region C = res.output.sub(0, 4 * r);
  const Region residue = res.output.sub(4 * r, r);

  ScratchScope scope(s);
  const auto cons = consolidate(s, A);
  res.count = cons.count;
  if (cons.count > R) fail(res, CompactionStatus::CapacityExceeded);
  if (r == 0) return res;

  Tape tape = s.substream("loose-thinning");
  for (unsigned pass = 0; pass < p.c0; ++pass) thinning_pass(s, cons.out, C, tape);

  // Halve the remaining array region by region until it is small.
  const double logn = std::log2(static_cast<double>(std::max<std::uint64_t>(n, 2)));
  const auto ell = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(c1 * logn)));
  const double m = static_cast<double>(std::max<std::uint64_t>(s.cfg().m(), 2));
  const double logm_n = std::max(1.0, log_base(static_cast<double>(std::max<std::uint64_t>(n, 2)), m));
  const double threshold = static_cast<double>(n) / (logm_n * logm_n);

  Region cur = cons.out;
  std::uint64_t overflow = 0;
  while (static_cast<double>(cur.blocks) >= threshold && cur.blocks > 1) {
    std::uint64_t next_blocks = 0;
    for (std::uint64_t off = 0; off < cur.blocks; off += ell) next_blocks += ceil_div(std::min(ell, cur.blocks - off), 2);
    const Region next = s.allocate(next_blocks);
    std::uint64_t w = 0;
    for (std::uint64_t off = 0; off < cur.blocks; off += ell) {
      const Region reg = cur.sub(off, std::min(ell, cur.blocks - off));
      det_oblivious_sort(s, reg, origin_less);
      const std::uint64_t keep = ceil_div(reg.blocks, 2);
      for (std::uint64_t q = 0; q < reg.blocks; ++q) {
        auto b = s.read(reg.at(q));
        if (q < keep) {
          s.write(next.at(w++), *b);
        } else {
          overflow += b->occupied_count();
        }
      }
    }
    cur = next;
  }
  if (overflow > 0) fail(res, CompactionStatus::RegionOverflow);

  det_oblivious_sort(s, cur, origin_less);
  if (copy_prefix(s, cur, residue, r) > 0) fail(res, CompactionStatus::ResidueOverflow);
  return res;
}

TowerSchedule TowerSchedule::make(std::uint64_t first, std::uint64_t limit) {
  TowerSchedule ts;
  ts.t.push_back(first);
  while (ts.t.back() < limit && ts.t.back() < 63) ts.t.push_back(std::uint64_t{1} << ts.t.back());
  return ts;
}

namespace {

struct LogStarState {
  ClientSession& s;
  Region D;
  Tape tape;
};

// Tight-compacts one region into r_i blocks, moves what it can into D with
// `passes` thinning passes, and writes the region back: compacted content
// when the compaction fit, the original otherwise. Returns items left.
std::uint64_t compact_region(LogStarState& st, Region reg, std::uint64_t ri, std::uint64_t passes) {
  ClientSession& s = st.s;
  ScratchScope scope(s);
  const auto tc = compact_tight(s, reg, ri * s.B());
  const bool ok = tc.succeeded;
  const Region prefix = tc.output;
  for (std::uint64_t q = 0; q < prefix.blocks; ++q) {
    auto b = s.read(prefix.at(q));
    if (!ok) b->clear();
    s.write(prefix.at(q), *b);
  }
  for (std::uint64_t pass = 0; pass < passes; ++pass) thinning_pass(s, prefix, st.D, st.tape);
  std::uint64_t left = 0;
  for (std::uint64_t q = 0; q < reg.blocks; ++q) {
    auto orig = s.read(reg.at(q));
    if (q < prefix.blocks) {
      auto moved = s.read(prefix.at(q));
      if (ok) *orig = *moved;
    } else if (ok) {
      orig->clear();
    }
    left += orig->all_empty() ? 0 : 1;
    s.write(reg.at(q), *orig);
  }
  return left;
}

}  // namespace

CompactionResult loose_logstar(ClientSession& s, Region A, std::uint64_t R, LogStarParams p) {
  const std::uint64_t B = s.B();
  const std::uint64_t n = A.blocks;
  s.cfg().require_cache_blocks(2, "loose_logstar");
  const std::uint64_t r = ceil_div(R, B);
  const std::uint64_t reserve = ceil_div(r, 4);

  CompactionResult res;
  res.capacity = logstar_capacity_blocks(R, B) * B;
  res.output = s.allocate(4 * r + reserve);
  const Region D = res.output.sub(0, 4 * r);
  const Region reserved = res.output.sub(4 * r, reserve);

  ScratchScope scope(s);
  const auto cons = consolidate(s, A);
  res.count = cons.count;
  if (cons.count > R) fail(res, CompactionStatus::CapacityExceeded);

  const double logn = std::log2(static_cast<double>(std::max<std::uint64_t>(n, 2)));
  const double sparse_limit = static_cast<double>(n) / (logn * logn);

  if (n < p.n0) {
    res.method = "logstar-base-sort";
    det_oblivious_sort(s, cons.out, origin_less);
    if (copy_prefix(s, cons.out, res.output.sub(0, r), r) > 0) fail(res, CompactionStatus::ResidueOverflow);
    return res;
  }
  if (static_cast<double>(r) < sparse_limit) {
    res.method = "logstar-base-tight";
    const auto tc = compact_tight(s, cons.out, R);
    copy_prefix(s, tc.output, res.output.sub(0, r), r);
    if (!tc.succeeded) fail(res, tc.status);
    return res;
  }

  res.method = "loose_logstar";
  LogStarState st{s, D, s.substream("logstar-thinning")};
  Region cur = cons.out;
  std::uint64_t left = 0;
  for (unsigned pass = 0; pass < p.c0; ++pass) {
    const auto ts = thinning_pass(s, cur, D, st.tape);
    left = ts.attempted - ts.placed;
  }

  const auto schedule = TowerSchedule::make(p.t1, n);
  for (std::size_t i = 0; i < schedule.t.size(); ++i) {
    const std::uint64_t t = schedule.t[i];
    const double t4 = std::pow(static_cast<double>(t), 4.0);
    const double bound = static_cast<double>(r) / t4;
    if (static_cast<double>(left) > bound) fail(res, CompactionStatus::PhaseInvariant);
    if (bound <= sparse_limit || i + 1 == schedule.t.size()) {
      const auto tc = compact_tight(s, cur, reserve * B);
      copy_prefix(s, tc.output, reserved, reserve);
      if (!tc.succeeded) fail(res, CompactionStatus::ResidueOverflow);
      break;
    }
    // Thinning-out step.
    const Region C = s.allocate(ceil_div(r, t));
    for (int pass = 0; pass < 2; ++pass) thinning_pass(s, cur, C, st.tape);
    for (std::uint64_t pass = 0; pass < t; ++pass) thinning_pass(s, C, D, st.tape);
    const Region grown = s.allocate(cur.blocks + C.blocks);
    for (std::uint64_t q = 0; q < grown.blocks; ++q) {
      auto b = s.read(q < cur.blocks ? cur.at(q) : C.at(q - cur.blocks));
      s.write(grown.at(q), *b);
    }
    cur = grown;
    // Region-compaction step.
    const std::uint64_t region = 4 * t >= 63 ? cur.blocks : std::min(cur.blocks, std::uint64_t{1} << (4 * t));
    const std::uint64_t ri = std::max<std::uint64_t>(1, region / (t * t));
    left = 0;
    for (std::uint64_t off = 0; off < cur.blocks; off += region) {
      left += compact_region(st, cur.sub(off, std::min(region, cur.blocks - off)), ri, t * t);
    }
  }
  return res;
}

}  // namespace oblivext
