#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "oblivext/em_model.hpp"

/// Shared fixtures for the unit tests.
namespace oblivext::testing {

struct Env {
  BlockStore store;
  ClientSession s;
  Env(MemConfig cfg, std::uint64_t seed = 1) : store(cfg.B, 0), s(cfg, seed, store) {}
};

/// Cells with keys from `keys`; a cell is distinguished where `marks` is true.
inline std::vector<Cell> make_cells(const std::vector<std::int64_t>& keys,
                                    const std::vector<bool>& marks = {}) {
  std::vector<Cell> out;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out.push_back(Cell::item(keys[i], keys[i] * 10, i, i < marks.size() && marks[i]));
  }
  return out;
}

inline std::vector<std::int64_t> occupied_keys(const std::vector<Cell>& cells) {
  std::vector<std::int64_t> out;
  for (const auto& c : cells) {
    if (c.occupied()) out.push_back(c.key());
  }
  return out;
}

inline std::vector<Cell> random_cells(std::mt19937_64& rng, std::size_t n, double mark_p,
                                      std::int64_t key_range = 1000) {
  std::uniform_int_distribution<std::int64_t> key(0, key_range);
  std::bernoulli_distribution mark(mark_p);
  std::vector<Cell> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(Cell::item(key(rng), 0, i, mark(rng)));
  return out;
}

}  // namespace oblivext::testing
