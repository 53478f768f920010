#include <deque>

#include "oblivext/primitives.hpp"

namespace oblivext {

ConsolidateResult consolidate(ClientSession& s, Region A, const CellPredicate& keep) {
  const std::uint64_t B = s.B();
  s.cfg().require_cache_blocks(2, "consolidate");
  ConsolidateResult res;
  res.out = s.allocate(A.blocks);
  if (A.blocks == 0) return res;

  // Carry buffer x plus the block y being scanned.
  auto carry_lease = s.reserve(B);
  std::vector<Cell> carry;
  carry.reserve(2 * B);
  auto absorb = [&](const Block& b) {
    for (const auto& c : b.cells) {
      if (c.occupied() && keep(c)) carry.push_back(c);
    }
  };

  {
    auto first = s.read(A.at(0));
    absorb(*first);
  }
  Block out;
  out.cells.resize(B);
  std::uint64_t out_idx = 0;
  for (std::uint64_t i = 1; i < A.blocks; ++i) {
    {
      auto y = s.read(A.at(i));
      absorb(*y);
    }
    if (carry.size() >= B) {
      std::copy(carry.begin(), carry.begin() + static_cast<std::ptrdiff_t>(B), out.cells.begin());
      carry.erase(carry.begin(), carry.begin() + static_cast<std::ptrdiff_t>(B));
      res.count += B;
    } else {
      std::fill(out.cells.begin(), out.cells.end(), Cell{});
    }
    s.write(res.out.at(out_idx++), out);
  }
  std::fill(out.cells.begin(), out.cells.end(), Cell{});
  std::copy(carry.begin(), carry.end(), out.cells.begin());
  res.count += carry.size();
  s.write(res.out.at(out_idx++), out);
  return res;
}

MultiwayResult consolidate_multiway(ClientSession& s, Region A, std::uint32_t colors) {
  const std::uint64_t B = s.B();
  if (colors < 1) throw PreconditionViolation("consolidate_multiway requires at least one color");
  s.cfg().require_cache_blocks(colors + 1, "consolidate_multiway");
  MultiwayResult res;
  res.per_color.assign(colors, 0);
  res.out = s.allocate(A.blocks + 2 * static_cast<std::uint64_t>(colors));

  // Leftover pool stays within colors*(B-1) cells between steps: a step
  // either emits B cells or leaves every group below B.
  auto pool_lease = s.reserve(colors * B);
  std::vector<std::deque<Cell>> groups(colors);
  Block out;
  out.cells.resize(B);
  std::uint64_t out_idx = 0;

  auto emit_group = [&](std::uint32_t g, std::uint64_t count) {
    std::fill(out.cells.begin(), out.cells.end(), Cell{});
    for (std::uint64_t j = 0; j < count; ++j) {
      out.cells[j] = groups[g].front();
      groups[g].pop_front();
    }
    res.per_color[g] += count;
  };

  for (std::uint64_t i = 0; i < A.blocks; ++i) {
    {
      auto blk = s.read(A.at(i));
      for (const auto& c : blk->cells) {
        if (c.occupied() && c.color() >= 1 && c.color() <= colors) groups[c.color() - 1].push_back(c);
      }
    }
    std::uint32_t full = colors;
    for (std::uint32_t g = 0; g < colors; ++g) {
      if (groups[g].size() >= B) {
        full = g;
        break;
      }
    }
    if (full < colors) {
      emit_group(full, B);
    } else {
      std::fill(out.cells.begin(), out.cells.end(), Cell{});
    }
    s.write(res.out.at(out_idx++), out);
  }
  // The pool holds at most colors*(B-1) cells, so the leftovers need fewer
  // than 2*colors blocks; the tail is padded to exactly that many.
  const std::uint64_t tail = 2 * static_cast<std::uint64_t>(colors);
  std::uint64_t written = 0;
  for (std::uint32_t g = 0; g < colors; ++g) {
    while (!groups[g].empty()) {
      emit_group(g, std::min<std::uint64_t>(B, groups[g].size()));
      s.write(res.out.at(out_idx++), out);
      ++written;
    }
  }
  std::fill(out.cells.begin(), out.cells.end(), Cell{});
  for (; written < tail; ++written) s.write(res.out.at(out_idx++), out);
  return res;
}

ThinningStats thinning_pass(ClientSession& s, Region A, Region C, Tape& tape) {
  if (C.blocks == 0) throw PreconditionViolation("thinning pass requires |C| >= 1");
  ThinningStats st;
  for (std::uint64_t i = 0; i < A.blocks; ++i) {
    const std::uint64_t j = tape.below(C.blocks);
    auto a = s.read(A.at(i));
    auto c = s.read(C.at(j));
    const bool has_item = !a->all_empty();
    st.attempted += has_item ? 1 : 0;
    if (has_item && c->all_empty()) {
      *c = *a;
      a->clear();
      ++st.placed;
    }
    s.write(C.at(j), *c);
    s.write(A.at(i), *a);
  }
  return st;
}

}  // namespace oblivext
