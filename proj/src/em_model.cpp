#include "oblivext/em_model.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>
#include <ostream>
#include <sstream>

namespace oblivext {

void MemConfig::validate() const {
  if (B < 1) throw PreconditionViolation("requires B >= 1");
  if (M < 2 * B) throw PreconditionViolation("requires M >= 2B");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw PreconditionViolation("requires epsilon in (0, 1]");
  if (d < 1) throw PreconditionViolation("requires d >= 1");
}

void MemConfig::require_cache_blocks(std::uint64_t blocks, std::string_view what) const {
  if (M < blocks * B) {
    std::ostringstream os;
    os << what << " requires M >= " << blocks << "B";
    throw PreconditionViolation(os.str());
  }
}

void MemConfig::require_wide_block_tall_cache(std::uint64_t cells, std::string_view what) const {
  const double nb = std::max<double>(2.0, static_cast<double>(ceil_div(cells, B)));
  if (static_cast<double>(B) + 1e-9 < std::pow(std::log2(nb), epsilon)) {
    throw PreconditionViolation(std::string(what) + " requires B >= log^epsilon(N/B)");
  }
  if (static_cast<double>(M) + 1e-9 < std::pow(static_cast<double>(B), 1.0 + epsilon)) {
    throw PreconditionViolation(std::string(what) + " requires M >= B^(1+epsilon)");
  }
}

void Cell::accumulate(const Cell& o, int sign) {
  const auto s = static_cast<std::uint64_t>(static_cast<std::int64_t>(sign));
  auto add = [s](auto& dst, auto src) {
    using T = std::remove_reference_t<decltype(dst)>;
    dst = static_cast<T>(static_cast<std::uint64_t>(dst) + s * static_cast<std::uint64_t>(src));
  };
  add(key_, o.key_);
  add(value_, o.value_);
  add(origin_, o.origin_);
  add(tag_, o.tag_);
  add(color_, o.color_);
  add(state_, o.state_);
  add(distinguished_, o.distinguished_);
}

std::size_t Block::occupied_count() const {
  std::size_t c = 0;
  for (const auto& cell : cells) c += cell.occupied() ? 1 : 0;
  return c;
}

void Block::clear() {
  for (auto& c : cells) c = Cell{};
  meta = {};
}

void AccessTrace::append(Op op, Addr addr) {
  const std::uint64_t enc = addr | (op == Op::Write ? (std::uint64_t{1} << 63) : 0);
  if (recording_) events_.push_back(enc);
  for (int i = 0; i < 8; ++i) {
    digest_ ^= (enc >> (8 * i)) & 0xff;
    digest_ *= 1099511628211ull;
  }
  ++total_;
}

std::size_t AccessTrace::epoch_length(std::string_view label) const {
  for (std::size_t i = 0; i < epochs_.size(); ++i) {
    if (epochs_[i].label == label) {
      const std::size_t end = i + 1 < epochs_.size() ? epochs_[i + 1].offset : static_cast<std::size_t>(total_);
      return end - epochs_[i].offset;
    }
  }
  return 0;
}

std::optional<std::size_t> AccessTrace::first_divergence(const AccessTrace& other) const {
  const std::size_t n = std::min(events_.size(), other.events_.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (events_[i] != other.events_[i]) return i;
  }
  if (events_.size() != other.events_.size() || total_ != other.total_) return n;
  if (digest_ != other.digest_) return n;
  return std::nullopt;
}

void AccessTrace::write_csv(std::ostream& os) const {
  os << "seq,op,addr,epoch\n";
  std::size_t e = 0;
  std::string current;
  for (std::size_t i = 0; i < size(); ++i) {
    while (e < epochs_.size() && epochs_[e].offset <= i) current = epochs_[e++].label;
    const auto ev = at(i);
    os << i << ',' << (ev.op == Op::Read ? 'R' : 'W') << ',' << ev.addr << ',' << current << '\n';
  }
}

Region Region::sub(std::uint64_t off, std::uint64_t count) const {
  if (off + count > blocks) throw AddressOutOfRange("sub-region exceeds region");
  return {base + off, count};
}

BlockStore::BlockStore(std::uint64_t block_cells, std::uint64_t blocks) : B_(block_cells) {
  if (block_cells < 1) throw PreconditionViolation("requires B >= 1");
  allocate(blocks);
}

Region BlockStore::allocate(std::uint64_t blocks) {
  const Region r{meta_.size(), blocks};
  meta_.resize(meta_.size() + blocks);
  cells_.resize(cells_.size() + blocks * B_);
  return r;
}

void BlockStore::rewind(std::uint64_t mark) {
  if (mark > meta_.size()) return;
  meta_.resize(mark);
  cells_.resize(mark * B_);
}

void BlockStore::check(Addr addr) const {
  if (addr >= meta_.size()) {
    throw AddressOutOfRange("block address " + std::to_string(addr) + " out of range");
  }
}

Block BlockStore::read(Addr addr) {
  check(addr);
  trace_.append(Op::Read, addr);
  return peek(addr);
}

void BlockStore::write(Addr addr, const Block& blk) {
  check(addr);
  trace_.append(Op::Write, addr);
  poke(addr, blk);
}

Block BlockStore::peek(Addr addr) const {
  check(addr);
  Block b;
  b.cells.assign(cells_.begin() + static_cast<std::ptrdiff_t>(addr * B_),
                 cells_.begin() + static_cast<std::ptrdiff_t>((addr + 1) * B_));
  b.meta = meta_[addr];
  return b;
}

void BlockStore::poke(Addr addr, const Block& blk) {
  check(addr);
  if (blk.cells.size() != B_) throw ModelError("block must hold exactly B cells");
  std::copy(blk.cells.begin(), blk.cells.end(), cells_.begin() + static_cast<std::ptrdiff_t>(addr * B_));
  meta_[addr] = blk.meta;
}

CacheLease& CacheLease::operator=(CacheLease&& o) noexcept {
  if (this != &o) {
    release();
    session_ = o.session_;
    cells_ = o.cells_;
    o.session_ = nullptr;
    o.cells_ = 0;
  }
  return *this;
}

void CacheLease::release() {
  if (session_ != nullptr) session_->refund(cells_);
  session_ = nullptr;
  cells_ = 0;
}

std::uint64_t Tape::below(std::uint64_t bound) {
  if (bound <= 1) return 0;
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return x % bound;
}

bool Tape::coin(double p) {
  const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  return u < p;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t label_hash(std::string_view label) {
  std::uint64_t h = 14695981039346656037ull;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

ClientSession::ClientSession(MemConfig cfg, std::uint64_t seed, BlockStore& store)
    : cfg_(cfg), store_(&store), seed_(seed), tape_(mix64(seed)) {
  cfg_.validate();
  if (store.block_cells() != cfg_.B) throw PreconditionViolation("store block size differs from cfg.B");
}

void ClientSession::charge(std::uint64_t cells) {
  if (used_ + cells > cfg_.M) {
    throw CacheOverflow("private cache overflow: " + std::to_string(used_ + cells) + " > M=" +
                        std::to_string(cfg_.M));
  }
  used_ += cells;
  peak_ = std::max(peak_, used_);
}

CacheLease ClientSession::reserve(std::uint64_t cells) {
  charge(cells);
  return {this, cells};
}

CachedBlock ClientSession::read(Addr addr) {
  auto lease = reserve(cfg_.B);
  Block b = store_->read(addr);
  ++stats_.reads;
  return {std::move(b), std::move(lease)};
}

void ClientSession::write(Addr addr, const Block& blk) {
  store_->write(addr, blk);
  ++stats_.writes;
}

CachedBlock ClientSession::fresh_block() {
  auto lease = reserve(cfg_.B);
  Block b;
  b.cells.resize(cfg_.B);
  return {std::move(b), std::move(lease)};
}

Tape ClientSession::substream(std::string_view label) {
  return Tape(mix64(seed_ ^ mix64(label_hash(label) + substreams_++)));
}

BlockStore store_create(const MemConfig& cfg, std::uint64_t blocks) {
  if (blocks < 1) throw PreconditionViolation("store needs at least one block");
  return BlockStore(cfg.B, blocks);
}

CachedBlock read_block(ClientSession& s, BlockStore& store, Addr addr) {
  if (&s.store() != &store) throw ModelError("session is bound to a different store");
  return s.read(addr);
}

void write_block(ClientSession& s, BlockStore& store, Addr addr, const Block& blk) {
  if (&s.store() != &store) throw ModelError("session is bound to a different store");
  s.write(addr, blk);
}

Region upload(BlockStore& store, const std::vector<Cell>& cells) {
  const std::uint64_t B = store.block_cells();
  const Region r = store.allocate(ceil_div(cells.size(), B));
  Block b;
  b.cells.resize(B);
  for (std::uint64_t i = 0; i < r.blocks; ++i) {
    for (std::uint64_t j = 0; j < B; ++j) {
      const std::uint64_t k = i * B + j;
      b.cells[j] = k < cells.size() ? cells[k] : Cell{};
    }
    store.poke(r.at(i), b);
  }
  return r;
}

std::vector<Cell> download(const BlockStore& store, Region r) {
  std::vector<Cell> out;
  out.reserve(r.blocks * store.block_cells());
  for (std::uint64_t i = 0; i < r.blocks; ++i) {
    const Block b = store.peek(r.at(i));
    out.insert(out.end(), b.cells.begin(), b.cells.end());
  }
  return out;
}

}  // namespace oblivext
