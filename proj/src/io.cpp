#include "oblivext/io.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace oblivext {

std::vector<Cell> read_cells(std::istream& in) {
  std::vector<Cell> cells;
  std::string line;
  std::uint64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::int64_t key = 0, value = 0;
    int dist = 0;
    std::string extra;
    if (!(ls >> key >> value >> dist) || (ls >> extra) || (dist != 0 && dist != 1)) {
      throw FormatError("line " + std::to_string(lineno) + ": expected `key value distinguished`");
    }
    cells.push_back(Cell::item(key, value, cells.size(), dist == 1));
  }
  return cells;
}

void write_cells(std::ostream& out, const std::vector<Cell>& cells) {
  for (const auto& c : cells) {
    if (c.occupied()) out << c.key() << ' ' << c.value() << ' ' << (c.distinguished() ? 1 : 0) << '\n';
  }
}

Generator parse_generator(std::string_view name) {
  if (name == "uniform") return Generator::Uniform;
  if (name == "sorted") return Generator::Sorted;
  if (name == "reverse") return Generator::Reverse;
  if (name == "all-equal") return Generator::AllEqual;
  if (name == "adversarial-dense") return Generator::AdversarialDense;
  throw FormatError("unknown generator `" + std::string(name) + "`");
}

std::string_view to_string(Generator g) {
  switch (g) {
    case Generator::Uniform: return "uniform";
    case Generator::Sorted: return "sorted";
    case Generator::Reverse: return "reverse";
    case Generator::AllEqual: return "all-equal";
    case Generator::AdversarialDense: return "adversarial-dense";
  }
  return "unknown";
}

std::vector<Cell> generate(Generator g, std::uint64_t N, std::uint64_t R, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  R = std::min(R, N);
  std::vector<std::int64_t> keys(N);
  std::uniform_int_distribution<std::int64_t> key(0, (std::int64_t{1} << 40) - 1);
  switch (g) {
    case Generator::Uniform:
    case Generator::AdversarialDense:
      for (auto& k : keys) k = key(rng);
      break;
    case Generator::Sorted:
      std::iota(keys.begin(), keys.end(), 0);
      break;
    case Generator::Reverse:
      std::iota(keys.rbegin(), keys.rend(), 0);
      break;
    case Generator::AllEqual:
      break;
  }
  std::vector<bool> marks(N, false);
  if (g == Generator::AdversarialDense) {
    const std::uint64_t start = N == R ? 0 : rng() % (N - R + 1);
    std::fill(marks.begin() + static_cast<std::ptrdiff_t>(start), marks.begin() + static_cast<std::ptrdiff_t>(start + R), true);
  } else {
    std::vector<std::uint64_t> pos(N);
    std::iota(pos.begin(), pos.end(), 0);
    for (std::uint64_t i = 0; i < R; ++i) {
      std::swap(pos[i], pos[i + rng() % (N - i)]);
      marks[pos[i]] = true;
    }
  }
  std::vector<Cell> cells;
  cells.reserve(N);
  for (std::uint64_t i = 0; i < N; ++i) cells.push_back(Cell::item(keys[i], keys[i], i, marks[i]));
  return cells;
}

void write_result_header(std::ostream& out) {
  out << "algo,N,M,B,R,seed,succeeded,ios_read,ios_write,version\n";
}

void write_result_row(std::ostream& out, const ResultRow& r) {
  out << r.algo << ',' << r.N << ',' << r.M << ',' << r.B << ',' << r.R << ',' << r.seed << ','
      << (r.succeeded ? 1 : 0) << ',' << r.ios_read << ',' << r.ios_write << ',' << kFormatVersion << '\n';
}

}  // namespace oblivext
