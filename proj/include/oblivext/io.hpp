#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "oblivext/em_model.hpp"

/// Input files, seeded input generators and result records.
namespace oblivext {

/// Written into the `version` column of every CSV this library emits.
inline constexpr std::string_view kFormatVersion = "1";

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses newline-delimited `key value distinguished` triples; the line
/// number (0-based, blank lines skipped) becomes the origin index.
std::vector<Cell> read_cells(std::istream& in);
/// Writes the occupied cells as triples, one per line.
void write_cells(std::ostream& out, const std::vector<Cell>& cells);

enum class Generator { Uniform, Sorted, Reverse, AllEqual, AdversarialDense };

Generator parse_generator(std::string_view name);
std::string_view to_string(Generator g);

/// N cells with exactly min(R, N) distinguished. Keys are uniform for
/// `uniform`, ascending / descending for `sorted` / `reverse`, all zero for
/// `all-equal`; `adversarial-dense` uses uniform keys with the distinguished
/// cells packed into one contiguous run.
std::vector<Cell> generate(Generator g, std::uint64_t N, std::uint64_t R, std::uint64_t seed);

struct ResultRow {
  std::string algo;
  std::uint64_t N = 0, M = 0, B = 0, R = 0, seed = 0;
  bool succeeded = false;
  std::uint64_t ios_read = 0, ios_write = 0;
};

void write_result_header(std::ostream& out);
void write_result_row(std::ostream& out, const ResultRow& row);

}  // namespace oblivext
