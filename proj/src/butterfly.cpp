#include <algorithm>

#include "oblivext/primitives.hpp"

namespace oblivext {

namespace {

constexpr std::int64_t kVacant = -1;

struct Held {
  CachedBlock blk;
  std::int64_t start_u = 0;
  std::int64_t start_label = kVacant;  // remaining distance at group start
  std::int64_t final_u = kVacant;
  bool fresh = false;                   // read in the current step
};

std::int64_t position_after(const Held& h, const std::vector<unsigned>& levels, std::size_t upto,
                            unsigned lo) {
  std::int64_t p = h.start_u;
  for (std::size_t li = 0; li <= upto; ++li) p -= (h.start_label & (std::int64_t{1} << levels[li])) >> lo;
  return p;
}

// One streaming pass over every residue class mod 2^lo, applying levels
// [lo, hi). Positions within a class are indexed by u; for rightward moves
// the class is walked back to front so that every move is toward smaller u.
// A chunk of W positions is held together with its predecessor, which is
// enough because a group moves a block by at most 2^(hi-lo) - 1 <= W slots,
// so blocks that can meet are never more than one chunk apart.
void route_group(ClientSession& s, Region A, unsigned lo, unsigned hi, bool right, std::uint64_t W,
                 RouteStats& st) {
  const std::uint64_t n = A.blocks;
  const std::uint64_t stride = std::uint64_t{1} << lo;
  std::vector<unsigned> levels;
  for (unsigned i = lo; i < hi; ++i) levels.push_back(i);
  if (right) std::reverse(levels.begin(), levels.end());

  std::vector<std::pair<std::int64_t, bool>> pos;
  for (std::uint64_t r = 0; r < std::min(stride, n); ++r) {
    const std::uint64_t len = (n - r + stride - 1) / stride;
    auto addr = [&](std::uint64_t u) { return A.at(r + (right ? len - 1 - u : u) * stride); };
    const std::uint64_t chunks = ceil_div(len, W);
    std::vector<Held> held;  // previous chunk followed by current chunk

    for (std::uint64_t k = 0; k <= chunks; ++k) {
      for (auto& h : held) h.fresh = false;
      if (k < chunks) {
        for (std::uint64_t u = k * W; u < std::min(len, (k + 1) * W); ++u) {
          Held h{s.read(addr(u))};
          h.fresh = true;
          h.start_u = static_cast<std::int64_t>(u);
          const std::int64_t label = h.blk->meta.label;
          if (label >= 0) {
            h.start_label = label;
            h.final_u = position_after(h, levels, levels.size() - 1, lo);
            if (h.final_u < 0) throw InvalidLabels("routing label moves a block outside the array");
            std::int64_t rem = label;
            for (unsigned i : levels) {
              if ((rem & (std::int64_t{1} << i)) != 0) ++st.moved;
              rem &= ~(std::int64_t{1} << i);
            }
            h.blk->meta.label = rem;
          }
          held.push_back(std::move(h));
        }
        // Replay the group level by level over the window: every slot may
        // receive at most one block at every level.
        for (std::size_t li = 0; li < levels.size(); ++li) {
          pos.clear();
          for (const auto& h : held) {
            if (h.final_u != kVacant) pos.emplace_back(position_after(h, levels, li, lo), h.fresh);
          }
          st.level_checks += pos.size();
          std::sort(pos.begin(), pos.end());
          for (std::size_t a = 1; a < pos.size(); ++a) {
            if (pos[a].first == pos[a - 1].first && (pos[a].second || pos[a - 1].second)) ++st.collisions;
          }
          if (st.collisions > 0) throw InvalidLabels("two blocks meet at a routing level");
        }
      }
      if (k >= 1) {
        const std::uint64_t begin = (k - 1) * W;
        const std::uint64_t end = std::min(len, k * W);
        std::vector<Block> out(end - begin);
        for (auto& b : out) {
          b.cells.resize(s.B());
          b.meta.label = kVacant;
        }
        for (auto& h : held) {
          if (h.final_u == kVacant) continue;
          const auto fu = static_cast<std::uint64_t>(h.final_u);
          if (fu >= begin && fu < end) out[fu - begin] = std::move(*h.blk);
        }
        for (std::uint64_t u = begin; u < end; ++u) s.write(addr(u), out[u - begin]);
        std::erase_if(held, [](const Held& h) { return !h.fresh; });
      }
    }
  }
  ++st.passes;
}

RouteStats route(ClientSession& s, Region A, std::uint64_t span, bool right) {
  const std::uint64_t free = s.cache_free_blocks();
  if (free < 2) throw CacheOverflow("butterfly routing needs two free cache blocks");
  const std::uint64_t W = pow2_floor(free / 2);
  RouteStats st;
  st.levels = span <= 1 ? 0 : ceil_log2(span);
  st.levels_per_pass = std::max(1u, floor_log2(W + 1));
  if (A.blocks == 0 || st.levels == 0) return st;
  const unsigned g = st.levels_per_pass;
  const unsigned groups = (st.levels + g - 1) / g;
  for (unsigned gi = 0; gi < groups; ++gi) {
    // Leftward routing consumes label bits low to high, expansion high to low.
    const unsigned idx = right ? groups - 1 - gi : gi;
    const unsigned lo = idx * g;
    const unsigned hi = std::min(st.levels, lo + g);
    route_group(s, A, lo, hi, right, W, st);
  }
  return st;
}

}  // namespace

std::uint64_t compute_distance_labels(ClientSession& s, Region A,
                                      const std::function<bool(const Block&)>& occupied) {
  std::uint64_t rank = 0;
  for (std::uint64_t j = 0; j < A.blocks; ++j) {
    auto b = s.read(A.at(j));
    if (occupied(*b)) {
      b->meta.label = static_cast<std::int64_t>(j - rank);
      ++rank;
    } else {
      b->clear();
      b->meta.label = kVacant;
    }
    b->meta.aux = b->meta.label;
    s.write(A.at(j), *b);
  }
  return rank;
}

std::uint64_t compute_distance_labels(ClientSession& s, Region A) {
  return compute_distance_labels(s, A, [](const Block& b) { return !b.all_empty(); });
}

RouteStats butterfly_route(ClientSession& s, Region A) {
  s.cfg().require_cache_blocks(3, "butterfly_route");
  return route(s, A, A.blocks, false);
}

RouteStats butterfly_expand_in_place(ClientSession& s, Region A) {
  s.cfg().require_cache_blocks(3, "butterfly_expand");
  return route(s, A, A.blocks, true);
}

Region butterfly_expand(ClientSession& s, Region D, std::uint64_t target_blocks, RouteStats* stats) {
  if (target_blocks < D.blocks) throw PreconditionViolation("expansion target smaller than source");
  const Region T = s.allocate(target_blocks);
  for (std::uint64_t i = 0; i < target_blocks; ++i) {
    if (i < D.blocks) {
      auto b = s.read(D.at(i));
      s.write(T.at(i), *b);
    } else {
      auto b = s.fresh_block();
      b->meta.label = kVacant;
      s.write(T.at(i), *b);
    }
  }
  const RouteStats st = butterfly_expand_in_place(s, T);
  if (stats != nullptr) *stats = st;
  return T;
}

}  // namespace oblivext
