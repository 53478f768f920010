#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "oblivext/em_model.hpp"

/// Invertible Bloom lookup table whose rows live in the block store, one row
/// per block. A row keeps `count` and `keySum` in the block metadata and the
/// value sum field-wise in the block's cells, all with wrapping arithmetic.
///
/// Row positions depend only on the key, so insert and touch produce the same
/// access pattern regardless of the value or of whether anything changes.
namespace oblivext {

struct IbltParams {
  unsigned k = 4;      // hash functions, >= 2
  double delta = 2.0;  // capacity factor, >= 2
};

class IbltTable {
 public:
  /// Table sized ceil(delta * k * n_expected) rows (rounded up to a multiple
  /// of k so each hash function owns an equal segment).
  static IbltTable create(ClientSession& s, std::uint64_t n_expected, IbltParams p = {});
  /// Table with an explicit row count (rounded up to a multiple of k).
  static IbltTable with_rows(ClientSession& s, std::uint64_t rows, unsigned k);

  [[nodiscard]] std::uint64_t rows() const { return region_.blocks; }
  [[nodiscard]] unsigned k() const { return static_cast<unsigned>(seeds_.size()); }
  [[nodiscard]] Region region() const { return region_; }
  [[nodiscard]] std::uint64_t segment() const { return rows() / k(); }

  /// Row index for hash function i; pairwise distinct across i by partitioning.
  [[nodiscard]] std::uint64_t hash(unsigned i, std::int64_t key) const;
  [[nodiscard]] std::vector<std::uint64_t> positions(std::int64_t key) const;

 private:
  IbltTable(Region r, std::vector<std::uint64_t> seeds) : region_(r), seeds_(std::move(seeds)) {}
  Region region_;
  std::vector<std::uint64_t> seeds_;
};

/// Plain (count, keySum, valueSum) view of a row; valueSum is the integer
/// value field of the first payload cell.
struct RowView {
  std::int64_t count;
  std::int64_t key_sum;
  std::int64_t value_sum;
};
RowView row_view(const Block& row);
[[nodiscard]] bool row_is_zero(const Block& row);

/// Payload block carrying one integer value.
Block value_payload(std::uint64_t B, std::int64_t y);

void iblt_insert(ClientSession& s, const IbltTable& t, std::int64_t x, const Block& payload);
void iblt_insert(ClientSession& s, const IbltTable& t, std::int64_t x, std::int64_t y);
void iblt_delete(ClientSession& s, const IbltTable& t, std::int64_t x, const Block& payload);
void iblt_delete(ClientSession& s, const IbltTable& t, std::int64_t x, std::int64_t y);
/// Reads and rewrites the k rows of x unchanged.
void iblt_touch(ClientSession& s, const IbltTable& t, std::int64_t x);

/// Untraced copy of the rows (the decoder works on a scratch copy).
std::vector<Block> iblt_snapshot(const BlockStore& store, const IbltTable& t);

struct NotFound {};
struct Unknown {};
using GetResult = std::variant<std::int64_t, NotFound, Unknown>;
GetResult iblt_get(const IbltTable& t, const std::vector<Block>& rows, std::int64_t x);

struct ListResult {
  std::vector<std::pair<std::int64_t, Block>> entries;
  bool complete = false;
  std::uint64_t row_visits = 0;
};
/// Peeling decoder over a scratch copy; linear in the row count.
ListResult iblt_list_entries(const IbltTable& t, std::vector<Block> rows);
/// (key, integer value) form of the above.
std::pair<std::vector<std::pair<std::int64_t, std::int64_t>>, bool> iblt_list_pairs(
    const IbltTable& t, const std::vector<Block>& rows);

/// Fixed-schedule decode that never reveals which rows were pure.
///
/// The table is scanned `rounds` times. Each row read applies pending
/// deletions that hash to it, extracts the row's entry if it is pure and the
/// buffers have room, and writes the row back. After each scan exactly
/// `per_round` staging blocks are written: the entries extracted in that scan
/// (key in `meta.label`) padded with empty blocks (`meta.label` = -1).
/// A final scan applies outstanding deletions and checks the table is empty.
struct ObliviousListResult {
  Region staging;           // rounds * per_round blocks
  std::uint64_t per_round = 0;
  std::uint64_t extracted = 0;
  bool complete = false;
  std::uint64_t rounds = 0;
};
/// Number of extraction scans needed for up to `max_entries` entries given
/// `pending_blocks` of private buffer.
std::uint64_t oblivious_list_rounds(std::uint64_t rows, std::uint64_t max_entries,
                                    std::uint64_t pending_blocks);
ObliviousListResult iblt_oblivious_list(ClientSession& s, const IbltTable& t,
                                        std::uint64_t max_entries);

/// Debug dump: `row,count,key_sum,value_sum`.
void write_iblt_csv(std::ostream& os, const std::vector<Block>& rows);

}  // namespace oblivext
