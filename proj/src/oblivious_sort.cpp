#include <algorithm>

#include "oblivext/primitives.hpp"

namespace oblivext {

namespace {

// Batcher's odd-even merge sort network on P = 2^k wires; comparators
// touching a wire >= units are skipped (those wires hold +infinity).
template <typename F>
void for_each_comparator(std::uint64_t units, F&& f) {
  const std::uint64_t P = std::uint64_t{1} << ceil_log2(units);
  for (std::uint64_t p = 1; p < P; p <<= 1) {
    for (std::uint64_t k = p; k >= 1; k >>= 1) {
      for (std::uint64_t j = k % p; j + k < P; j += 2 * k) {
        for (std::uint64_t i = 0; i < std::min(k, P - j - k); ++i) {
          const std::uint64_t a = i + j;
          const std::uint64_t b = i + j + k;
          if (a / (2 * p) == b / (2 * p) && b < units) f(a, b);
        }
      }
    }
  }
}

struct UnitLayout {
  std::uint64_t g;      // blocks per unit
  std::uint64_t units;
  std::uint64_t blocks;

  [[nodiscard]] std::uint64_t begin(std::uint64_t u) const { return u * g; }
  [[nodiscard]] std::uint64_t size(std::uint64_t u) const { return std::min(g, blocks - u * g); }
};

UnitLayout layout_for(ClientSession& s, std::uint64_t blocks) {
  const std::uint64_t free = s.cache_free_blocks();
  if (free < 2) throw CacheOverflow("oblivious sort needs two free cache blocks");
  if (blocks <= free) return {std::max<std::uint64_t>(blocks, 1), 1, blocks};
  const std::uint64_t g = pow2_floor(free / 2);
  return {g, ceil_div(blocks, g), blocks};
}

// Loads the listed block ranges, lets `sorter` reorder their contents, and
// writes them back to the same addresses.
template <typename Sorter>
void load_sort_store(ClientSession& s, Region A, std::initializer_list<std::pair<std::uint64_t, std::uint64_t>> ranges,
                     Sorter&& sorter) {
  std::vector<CachedBlock> held;
  for (auto [b, len] : ranges) {
    for (std::uint64_t i = 0; i < len; ++i) held.push_back(s.read(A.at(b + i)));
  }
  sorter(held);
  std::size_t h = 0;
  for (auto [b, len] : ranges) {
    for (std::uint64_t i = 0; i < len; ++i) s.write(A.at(b + i), *held[h++]);
  }
}

template <typename Sorter>
void network_sort(ClientSession& s, Region A, Sorter&& sorter) {
  if (A.blocks == 0) return;
  const UnitLayout L = layout_for(s, A.blocks);
  for (std::uint64_t u = 0; u < L.units; ++u) load_sort_store(s, A, {{L.begin(u), L.size(u)}}, sorter);
  if (L.units == 1) return;
  for_each_comparator(L.units, [&](std::uint64_t a, std::uint64_t b) {
    load_sort_store(s, A, {{L.begin(a), L.size(a)}, {L.begin(b), L.size(b)}}, sorter);
  });
}

}  // namespace

std::uint64_t odd_even_comparators(std::uint64_t units) {
  std::uint64_t c = 0;
  if (units > 1) for_each_comparator(units, [&](std::uint64_t, std::uint64_t) { ++c; });
  return c;
}

void det_oblivious_sort(ClientSession& s, Region A, const CellLess& less) {
  std::vector<Cell> buf;
  network_sort(s, A, [&](std::vector<CachedBlock>& held) {
    buf.clear();
    for (auto& b : held) buf.insert(buf.end(), b->cells.begin(), b->cells.end());
    std::stable_sort(buf.begin(), buf.end(), less);
    std::size_t k = 0;
    for (auto& b : held) {
      for (auto& c : b->cells) c = buf[k++];
    }
  });
}

void det_oblivious_sort_blocks(ClientSession& s, Region A, const BlockLess& less) {
  std::vector<Block> buf;
  network_sort(s, A, [&](std::vector<CachedBlock>& held) {
    buf.clear();
    for (auto& b : held) buf.push_back(std::move(*b));
    std::stable_sort(buf.begin(), buf.end(), less);
    for (std::size_t k = 0; k < held.size(); ++k) *held[k] = std::move(buf[k]);
  });
}

}  // namespace oblivext
