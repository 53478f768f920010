#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

/// Two-party external-memory model: a server-side block store that records
/// every access it serves, and a client session with a bounded private cache
/// and a seedable random tape.
namespace oblivext {

using Addr = std::uint64_t;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base for violations of the memory model or of an operation's contract.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AddressOutOfRange : public ModelError {
 public:
  using ModelError::ModelError;
};

class CacheOverflow : public ModelError {
 public:
  using ModelError::ModelError;
};

class PreconditionViolation : public ModelError {
 public:
  using ModelError::ModelError;
};

class InvalidLabels : public ModelError {
 public:
  using ModelError::ModelError;
};

/// Reading a payload field of an Empty cell.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct MemConfig {
  std::uint64_t N = 0;  // total cells
  std::uint64_t B = 1;  // cells per block
  std::uint64_t M = 2;  // private cache capacity in cells
  unsigned d = 1;       // target failure exponent
  double epsilon = 0.5; // wide-block / tall-cache exponent, in (0, 1]

  [[nodiscard]] std::uint64_t n() const { return (N + B - 1) / B; }
  [[nodiscard]] std::uint64_t m() const { return M / B; }

  /// Throws PreconditionViolation unless B >= 1, M >= 2B, epsilon in (0,1].
  void validate() const;

  void require_cache_blocks(std::uint64_t blocks, std::string_view what) const;
  /// B >= log^epsilon(N/B) and M >= B^(1+epsilon).
  void require_wide_block_tall_cache(std::uint64_t cells, std::string_view what) const;
};

// ---------------------------------------------------------------------------
// Cells and blocks
// ---------------------------------------------------------------------------

/// One memory cell. Empty cells carry no readable payload.
///
/// The raw fields are also used as wrapping accumulators when a block serves
/// as an invertible Bloom table row; see iblt.hpp.
class Cell {
 public:
  Cell() = default;
  static Cell item(std::int64_t key, std::int64_t value, std::uint64_t origin,
                   bool distinguished = false, std::uint32_t color = 0) {
    Cell c;
    c.state_ = 1;
    c.key_ = key;
    c.value_ = value;
    c.origin_ = origin;
    c.distinguished_ = distinguished ? 1 : 0;
    c.color_ = color;
    return c;
  }

  [[nodiscard]] bool empty() const { return state_ == 0; }
  [[nodiscard]] bool occupied() const { return state_ != 0; }

  [[nodiscard]] std::int64_t key() const {
    check();
    return key_;
  }
  [[nodiscard]] std::int64_t value() const {
    check();
    return value_;
  }
  [[nodiscard]] std::uint64_t origin() const {
    check();
    return origin_;
  }
  [[nodiscard]] bool distinguished() const { return occupied() && distinguished_ != 0; }
  [[nodiscard]] std::uint32_t color() const { return occupied() ? color_ : 0; }

  void set_distinguished(bool on) {
    check();
    distinguished_ = on ? 1 : 0;
  }
  void set_color(std::uint32_t c) {
    check();
    color_ = c;
  }

  // Raw fields, readable on any cell; used when a block is a table row.
  [[nodiscard]] std::int64_t raw_key() const { return key_; }
  [[nodiscard]] std::int64_t raw_value() const { return value_; }
  [[nodiscard]] bool raw_zero() const { return *this == Cell{}; }

  /// Client-side scratch tag. Algorithms use it for temporary sort keys; it
  /// is readable on empty cells too.
  [[nodiscard]] std::uint64_t tag() const { return tag_; }
  void set_tag(std::uint64_t t) { tag_ = t; }

  friend bool operator==(const Cell&, const Cell&) = default;

  // Wrapping field-wise arithmetic, used by table rows.
  void accumulate(const Cell& o, int sign);

 private:
  void check() const {
    if (state_ == 0) throw ContractError("payload access on an Empty cell");
  }

  std::int64_t key_ = 0;
  std::int64_t value_ = 0;
  std::uint64_t origin_ = 0;
  std::uint64_t tag_ = 0;
  std::uint32_t color_ = 0;
  std::uint8_t state_ = 0;
  std::uint8_t distinguished_ = 0;
};

/// Total order used throughout: empty cells are +infinity, occupied cells
/// order by (key, origin).
inline bool key_less(const Cell& a, const Cell& b) {
  if (a.empty()) return false;
  if (b.empty()) return true;
  if (a.key() != b.key()) return a.key() < b.key();
  return a.origin() < b.origin();
}

/// Per-block metadata that travels with the block. For cell blocks `label`
/// carries a routing label and `aux` an auxiliary word; table rows use them
/// as count and key sum.
struct BlockMeta {
  std::int64_t label = 0;
  std::int64_t aux = 0;
  friend bool operator==(const BlockMeta&, const BlockMeta&) = default;
};

struct Block {
  std::vector<Cell> cells;
  BlockMeta meta;

  [[nodiscard]] std::size_t occupied_count() const;
  [[nodiscard]] bool all_empty() const { return occupied_count() == 0; }
  void clear();
  friend bool operator==(const Block&, const Block&) = default;
};

// ---------------------------------------------------------------------------
// Access trace
// ---------------------------------------------------------------------------

enum class Op : std::uint8_t { Read, Write };

struct TraceEvent {
  Op op;
  Addr addr;
  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct Epoch {
  std::string label;
  std::size_t offset;
  friend bool operator==(const Epoch&, const Epoch&) = default;
};

/// Ordered (op, address) events plus labeled epoch offsets. Never holds data.
class AccessTrace {
 public:
  void append(Op op, Addr addr);
  void mark(std::string label) { epochs_.push_back({std::move(label), static_cast<std::size_t>(total_)}); }

  [[nodiscard]] std::size_t size() const { return events_.size(); }
  [[nodiscard]] TraceEvent at(std::size_t i) const {
    const auto raw = events_[i];
    return {(raw >> 63) ? Op::Write : Op::Read, raw & ~(std::uint64_t{1} << 63)};
  }
  [[nodiscard]] const std::vector<Epoch>& epochs() const { return epochs_; }
  /// Number of events between the epoch and the next one (or the end).
  [[nodiscard]] std::size_t epoch_length(std::string_view label) const;
  /// FNV-1a over the encoded events; maintained even when events are not kept.
  [[nodiscard]] std::uint64_t digest() const { return digest_; }
  [[nodiscard]] std::uint64_t total_events() const { return total_; }

  void set_recording(bool on) { recording_ = on; }
  [[nodiscard]] bool recording() const { return recording_; }

  /// First index at which the two traces differ (length mismatch counts).
  [[nodiscard]] std::optional<std::size_t> first_divergence(const AccessTrace& other) const;

  /// `seq,op,addr,epoch` CSV.
  void write_csv(std::ostream& os) const;

  friend bool operator==(const AccessTrace& a, const AccessTrace& b) {
    return a.total_ == b.total_ && a.digest_ == b.digest_ && a.events_ == b.events_;
  }

 private:
  std::vector<std::uint64_t> events_;
  std::vector<Epoch> epochs_;
  std::uint64_t digest_ = 14695981039346656037ull;
  std::uint64_t total_ = 0;
  bool recording_ = true;
};

// ---------------------------------------------------------------------------
// Block store
// ---------------------------------------------------------------------------

/// Contiguous run of block addresses.
struct Region {
  Addr base = 0;
  std::uint64_t blocks = 0;

  [[nodiscard]] Addr at(std::uint64_t i) const { return base + i; }
  [[nodiscard]] Region sub(std::uint64_t off, std::uint64_t count) const;
  [[nodiscard]] bool empty() const { return blocks == 0; }
};

/// Server-side storage. Holds plaintext; exposes only (op, addr) through its
/// trace.
class BlockStore {
 public:
  BlockStore(std::uint64_t block_cells, std::uint64_t blocks);

  [[nodiscard]] std::uint64_t block_cells() const { return B_; }
  [[nodiscard]] std::uint64_t size() const { return meta_.size(); }

  /// Appends `blocks` zeroed blocks and returns their region.
  Region allocate(std::uint64_t blocks);
  /// Allocation high-water mark; rewinding frees everything allocated later.
  [[nodiscard]] std::uint64_t mark() const { return size(); }
  void rewind(std::uint64_t mark);

  Block read(Addr addr);
  void write(Addr addr, const Block& blk);

  void epoch_mark(std::string label) { trace_.mark(std::move(label)); }
  [[nodiscard]] AccessTrace trace_snapshot() const { return trace_; }
  [[nodiscard]] const AccessTrace& trace() const { return trace_; }
  void set_trace_recording(bool on) { trace_.set_recording(on); }

  /// Untraced inspection for tests and loaders that model the initial upload.
  [[nodiscard]] Block peek(Addr addr) const;
  void poke(Addr addr, const Block& blk);

 private:
  void check(Addr addr) const;

  std::uint64_t B_;
  std::vector<Cell> cells_;
  std::vector<BlockMeta> meta_;
  AccessTrace trace_;
};

// ---------------------------------------------------------------------------
// Client session
// ---------------------------------------------------------------------------

struct IOStats {
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  [[nodiscard]] std::uint64_t total() const { return reads + writes; }
};

class ClientSession;

/// RAII claim on private-cache cells.
class CacheLease {
 public:
  CacheLease() = default;
  CacheLease(ClientSession* s, std::uint64_t cells) : session_(s), cells_(cells) {}
  CacheLease(CacheLease&& o) noexcept : session_(o.session_), cells_(o.cells_) {
    o.session_ = nullptr;
    o.cells_ = 0;
  }
  CacheLease& operator=(CacheLease&& o) noexcept;
  CacheLease(const CacheLease&) = delete;
  CacheLease& operator=(const CacheLease&) = delete;
  ~CacheLease() { release(); }

  void release();
  [[nodiscard]] std::uint64_t cells() const { return cells_; }

 private:
  ClientSession* session_ = nullptr;
  std::uint64_t cells_ = 0;
};

/// A block resident in the private cache; its B cells stay charged until the
/// object is destroyed.
class CachedBlock {
 public:
  CachedBlock() = default;
  CachedBlock(Block b, CacheLease lease) : block_(std::move(b)), lease_(std::move(lease)) {}

  Block& operator*() { return block_; }
  const Block& operator*() const { return block_; }
  Block* operator->() { return &block_; }
  const Block* operator->() const { return &block_; }

 private:
  Block block_;
  CacheLease lease_;
};

/// Seedable 64-bit random tape. Sub-streams are derived from the session seed
/// and a fixed label so any consumer can be replayed independently.
class Tape {
 public:
  explicit Tape(std::uint64_t seed) : seed_(seed), gen_(seed) {}
  std::uint64_t next() { return gen_(); }
  /// Uniform in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  /// Bernoulli with probability p.
  bool coin(double p);
  [[nodiscard]] std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t label_hash(std::string_view label);

class ClientSession {
 public:
  ClientSession(MemConfig cfg, std::uint64_t seed, BlockStore& store);

  [[nodiscard]] const MemConfig& cfg() const { return cfg_; }
  [[nodiscard]] std::uint64_t B() const { return cfg_.B; }
  BlockStore& store() { return *store_; }

  CachedBlock read(Addr addr);
  void write(Addr addr, const Block& blk);
  /// A fresh all-empty block held in cache.
  CachedBlock fresh_block();
  /// Reserve working cells; throws CacheOverflow when M would be exceeded.
  CacheLease reserve(std::uint64_t cells);
  CacheLease reserve_blocks(std::uint64_t blocks) { return reserve(blocks * cfg_.B); }

  [[nodiscard]] std::uint64_t cache_used() const { return used_; }
  [[nodiscard]] std::uint64_t cache_free() const { return cfg_.M - used_; }
  [[nodiscard]] std::uint64_t cache_free_blocks() const { return cache_free() / cfg_.B; }
  [[nodiscard]] std::uint64_t peak_cache() const { return peak_; }

  Tape& tape() { return tape_; }
  /// Independent stream for `label`, fixed by (seed, label, use count).
  Tape substream(std::string_view label);
  [[nodiscard]] std::uint64_t seed() const { return seed_; }

  [[nodiscard]] const IOStats& stats() const { return stats_; }
  void epoch(std::string label) { store_->epoch_mark(std::move(label)); }

  Region allocate(std::uint64_t blocks) { return store_->allocate(blocks); }

 private:
  friend class CacheLease;
  void charge(std::uint64_t cells);
  void refund(std::uint64_t cells) { used_ -= cells; }

  MemConfig cfg_;
  BlockStore* store_;
  std::uint64_t seed_;
  Tape tape_;
  std::uint64_t substreams_ = 0;
  std::uint64_t used_ = 0;
  std::uint64_t peak_ = 0;
  IOStats stats_;
};

/// Frees scratch allocations made inside a scope. Only valid when nothing
/// allocated within the scope must outlive it.
class ScratchScope {
 public:
  explicit ScratchScope(ClientSession& s) : store_(s.store()), mark_(store_.mark()) {}
  ~ScratchScope() { store_.rewind(mark_); }
  ScratchScope(const ScratchScope&) = delete;
  ScratchScope& operator=(const ScratchScope&) = delete;

 private:
  BlockStore& store_;
  std::uint64_t mark_;
};

// Free-function surface over the session/store pair.
BlockStore store_create(const MemConfig& cfg, std::uint64_t blocks);
CachedBlock read_block(ClientSession& s, BlockStore& store, Addr addr);
void write_block(ClientSession& s, BlockStore& store, Addr addr, const Block& blk);

// ---------------------------------------------------------------------------
// Small numeric helpers
// ---------------------------------------------------------------------------

inline std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }
inline unsigned ceil_log2(std::uint64_t x) {
  unsigned l = 0;
  while ((std::uint64_t{1} << l) < x) ++l;
  return l;
}
inline unsigned floor_log2(std::uint64_t x) {
  unsigned l = 0;
  while (x > 1) {
    x >>= 1;
    ++l;
  }
  return l;
}
inline std::uint64_t pow2_floor(std::uint64_t x) { return x == 0 ? 0 : std::uint64_t{1} << floor_log2(x); }

/// Uploads `cells` into a fresh region without tracing (the initial state of
/// the outsourced array).
Region upload(BlockStore& store, const std::vector<Cell>& cells);
/// Untraced download of a region's cells (test/reporting side).
std::vector<Cell> download(const BlockStore& store, Region r);

}  // namespace oblivext
