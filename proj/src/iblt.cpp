#include "oblivext/iblt.hpp"

#include <cmath>
#include <deque>
#include <ostream>

namespace oblivext {

namespace {

void add_entry(Block& row, std::int64_t x, const Block& payload, int sign) {
  row.meta.label = static_cast<std::int64_t>(static_cast<std::uint64_t>(row.meta.label) +
                                             static_cast<std::uint64_t>(static_cast<std::int64_t>(sign)));
  row.meta.aux = static_cast<std::int64_t>(static_cast<std::uint64_t>(row.meta.aux) +
                                           static_cast<std::uint64_t>(static_cast<std::int64_t>(sign)) *
                                               static_cast<std::uint64_t>(x));
  for (std::size_t j = 0; j < row.cells.size(); ++j) row.cells[j].accumulate(payload.cells[j], sign);
}

void apply(ClientSession& s, const IbltTable& t, std::int64_t x, const Block* payload, int sign) {
  for (unsigned i = 0; i < t.k(); ++i) {
    const Addr a = t.region().at(t.hash(i, x));
    auto row = s.read(a);
    if (payload != nullptr) add_entry(*row, x, *payload, sign);
    s.write(a, *row);
  }
}

// A count-1 row whose key hashes back to it holds exactly one entry.
bool pure(const IbltTable& t, const Block& row, std::uint64_t idx) {
  if (row.meta.label != 1) return false;
  const std::int64_t x = row.meta.aux;
  for (unsigned i = 0; i < t.k(); ++i) {
    if (t.hash(i, x) == idx) return true;
  }
  return false;
}

Block entry_payload(const Block& row) {
  Block p;
  p.cells = row.cells;
  return p;
}

}  // namespace

IbltTable IbltTable::create(ClientSession& s, std::uint64_t n_expected, IbltParams p) {
  if (p.k < 2) throw PreconditionViolation("IBLT requires k >= 2");
  if (p.delta < 2.0) throw PreconditionViolation("IBLT requires delta >= 2");
  const auto rows = static_cast<std::uint64_t>(std::ceil(p.delta * p.k * static_cast<double>(n_expected)));
  return with_rows(s, rows, p.k);
}

IbltTable IbltTable::with_rows(ClientSession& s, std::uint64_t rows, unsigned k) {
  if (k < 2) throw PreconditionViolation("IBLT requires k >= 2");
  const std::uint64_t seg = std::max<std::uint64_t>(1, ceil_div(rows, k));
  Tape tape = s.substream("iblt-hash");
  std::vector<std::uint64_t> seeds(k);
  for (auto& sd : seeds) sd = tape.next();
  return IbltTable(s.allocate(seg * k), std::move(seeds));
}

std::uint64_t IbltTable::hash(unsigned i, std::int64_t key) const {
  const std::uint64_t h = mix64(seeds_[i] ^ mix64(static_cast<std::uint64_t>(key)));
  return i * segment() + h % segment();
}

std::vector<std::uint64_t> IbltTable::positions(std::int64_t key) const {
  std::vector<std::uint64_t> out(k());
  for (unsigned i = 0; i < k(); ++i) out[i] = hash(i, key);
  return out;
}

RowView row_view(const Block& row) {
  return {row.meta.label, row.meta.aux, row.cells.empty() ? 0 : row.cells[0].raw_value()};
}

bool row_is_zero(const Block& row) {
  if (row.meta.label != 0 || row.meta.aux != 0) return false;
  for (const auto& c : row.cells) {
    if (!c.raw_zero()) return false;
  }
  return true;
}

Block value_payload(std::uint64_t B, std::int64_t y) {
  Block p;
  p.cells.resize(B);
  p.cells[0] = Cell::item(0, y, 0);
  return p;
}

void iblt_insert(ClientSession& s, const IbltTable& t, std::int64_t x, const Block& payload) {
  apply(s, t, x, &payload, +1);
}
void iblt_insert(ClientSession& s, const IbltTable& t, std::int64_t x, std::int64_t y) {
  iblt_insert(s, t, x, value_payload(s.B(), y));
}
void iblt_delete(ClientSession& s, const IbltTable& t, std::int64_t x, const Block& payload) {
  apply(s, t, x, &payload, -1);
}
void iblt_delete(ClientSession& s, const IbltTable& t, std::int64_t x, std::int64_t y) {
  iblt_delete(s, t, x, value_payload(s.B(), y));
}
void iblt_touch(ClientSession& s, const IbltTable& t, std::int64_t x) { apply(s, t, x, nullptr, 0); }

std::vector<Block> iblt_snapshot(const BlockStore& store, const IbltTable& t) {
  std::vector<Block> rows;
  rows.reserve(t.rows());
  for (std::uint64_t i = 0; i < t.rows(); ++i) rows.push_back(store.peek(t.region().at(i)));
  return rows;
}

GetResult iblt_get(const IbltTable& t, const std::vector<Block>& rows, std::int64_t x) {
  bool saw_zero = false;
  for (unsigned i = 0; i < t.k(); ++i) {
    const Block& r = rows[t.hash(i, x)];
    if (r.meta.label == 1 && r.meta.aux == x) return r.cells[0].raw_value();
    if (r.meta.label == 0) saw_zero = true;
  }
  if (saw_zero) return NotFound{};
  return Unknown{};
}

ListResult iblt_list_entries(const IbltTable& t, std::vector<Block> rows) {
  ListResult out;
  std::deque<std::uint64_t> work;
  for (std::uint64_t i = 0; i < rows.size(); ++i) {
    ++out.row_visits;
    if (pure(t, rows[i], i)) work.push_back(i);
  }
  while (!work.empty()) {
    const std::uint64_t i = work.front();
    work.pop_front();
    ++out.row_visits;
    if (!pure(t, rows[i], i)) continue;
    const std::int64_t x = rows[i].meta.aux;
    Block payload = entry_payload(rows[i]);
    for (unsigned j = 0; j < t.k(); ++j) {
      const std::uint64_t r = t.hash(j, x);
      add_entry(rows[r], x, payload, -1);
      ++out.row_visits;
      if (pure(t, rows[r], r)) work.push_back(r);
    }
    out.entries.emplace_back(x, std::move(payload));
  }
  out.complete = true;
  for (const auto& r : rows) {
    if (!row_is_zero(r)) {
      out.complete = false;
      break;
    }
  }
  return out;
}

std::pair<std::vector<std::pair<std::int64_t, std::int64_t>>, bool> iblt_list_pairs(
    const IbltTable& t, const std::vector<Block>& rows) {
  auto res = iblt_list_entries(t, rows);
  std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
  pairs.reserve(res.entries.size());
  for (const auto& [x, p] : res.entries) pairs.emplace_back(x, p.cells[0].raw_value());
  return {std::move(pairs), res.complete};
}

std::uint64_t oblivious_list_rounds(std::uint64_t rows, std::uint64_t max_entries,
                                    std::uint64_t pending_blocks) {
  // Pending entries retire within one scan of their extraction, so a scan
  // extracts about pending_blocks new entries once the buffer cycles; the
  // additive term covers the peeling depth of a sparse random hypergraph.
  return 2 * ceil_div(max_entries, std::max<std::uint64_t>(1, pending_blocks)) + 4 +
         ceil_log2(ceil_log2(std::max<std::uint64_t>(rows, 2)) + 1);
}

ObliviousListResult iblt_oblivious_list(ClientSession& s, const IbltTable& t,
                                        std::uint64_t max_entries) {
  const std::uint64_t free_blocks = s.cache_free_blocks();
  if (free_blocks < 4) throw PreconditionViolation("oblivious IBLT listing requires 4 free cache blocks");
  // Half the spare cache holds entries awaiting deletion from their other
  // rows, half holds the entries extracted during the current scan.
  const std::uint64_t cap = (free_blocks - 2) / 2;
  auto buffer_lease = s.reserve_blocks(2 * cap);

  struct Pending {
    std::int64_t key;
    Block payload;
    std::vector<std::uint64_t> rows;
    std::vector<bool> applied;
  };
  std::vector<Pending> pending;
  std::vector<Block> round_out;

  ObliviousListResult res;
  res.per_round = cap;
  res.rounds = oblivious_list_rounds(t.rows(), max_entries, cap);
  res.staging = s.allocate(res.rounds * cap);

  auto apply_pending = [&](Block& row, std::uint64_t idx) {
    for (auto& p : pending) {
      for (unsigned j = 0; j < t.k(); ++j) {
        if (p.rows[j] == idx && !p.applied[j]) {
          add_entry(row, p.key, p.payload, -1);
          p.applied[j] = true;
        }
      }
    }
    std::erase_if(pending, [](const Pending& p) {
      return std::all_of(p.applied.begin(), p.applied.end(), [](bool b) { return b; });
    });
  };

  std::uint64_t out_idx = 0;
  for (std::uint64_t round = 0; round < res.rounds; ++round) {
    round_out.clear();
    for (std::uint64_t i = 0; i < t.rows(); ++i) {
      auto row = s.read(t.region().at(i));
      apply_pending(*row, i);
      if (pending.size() < cap && round_out.size() < cap && pure(t, *row, i)) {
        Pending p{row->meta.aux, entry_payload(*row), t.positions(row->meta.aux), std::vector<bool>(t.k(), false)};
        Block out = p.payload;
        out.meta.label = p.key;
        round_out.push_back(std::move(out));
        pending.push_back(std::move(p));
        apply_pending(*row, i);
        ++res.extracted;
      }
      s.write(t.region().at(i), *row);
    }
    Block empty;
    empty.cells.resize(s.B());
    empty.meta.label = -1;
    for (std::uint64_t j = 0; j < cap; ++j) {
      s.write(res.staging.at(out_idx++), j < round_out.size() ? round_out[j] : empty);
    }
  }
  bool all_zero = true;
  for (std::uint64_t i = 0; i < t.rows(); ++i) {
    auto row = s.read(t.region().at(i));
    apply_pending(*row, i);
    all_zero = all_zero && row_is_zero(*row);
    s.write(t.region().at(i), *row);
  }
  res.complete = all_zero && pending.empty();
  return res;
}

void write_iblt_csv(std::ostream& os, const std::vector<Block>& rows) {
  os << "row,count,key_sum,value_sum\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto v = row_view(rows[i]);
    os << i << ',' << v.count << ',' << v.key_sum << ',' << v.value_sum << '\n';
  }
}

}  // namespace oblivext
