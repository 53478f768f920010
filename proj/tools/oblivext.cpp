#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>

#include "oblivext/catalog.hpp"
#include "oblivext/io.hpp"
#include "oblivext/selection.hpp"

using namespace oblivext;

namespace {

struct Common {
  std::uint64_t N = 65536, B = 16, M = 256, seed = 1;
  unsigned d = 1;
  double epsilon = 0.5;
  std::string gen = "uniform";
  std::string input, out, stats, trace;
  std::uint64_t R = 0;  // 0 selects N/8
};

struct Extra {
  std::int64_t k = -1;  // -1 selects ceil(N/2)
  std::uint64_t q = 0;
  unsigned c0 = 0, c1 = 0, k_iblt = 4;
  double delta = 3, c_deal = 8;
  std::uint64_t n0 = 0, t1 = 4;
  std::string algo;
  std::uint64_t seeds = 10, inputs = 5;
  std::string report, model;
  unsigned min_log = 14, max_log = 20, step = 1;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--n", c.N, "number of cells (ignored with --input)")->capture_default_str();
  sub->add_option("--b", c.B, "cells per block")->capture_default_str();
  sub->add_option("--m", c.M, "cache capacity in cells")->capture_default_str();
  sub->add_option("--seed", c.seed, "random tape seed (also seeds the generator)")->capture_default_str();
  sub->add_option("--d", c.d, "failure exponent")->capture_default_str();
  sub->add_option("--epsilon", c.epsilon, "wide-block / tall-cache exponent")->capture_default_str();
  sub->add_option("--gen", c.gen, "uniform|sorted|reverse|all-equal|adversarial-dense")->capture_default_str();
  sub->add_option("--input", c.input, "input file of `key value distinguished` lines");
  sub->add_option("--out", c.out, "output file for cells or selected values");
  sub->add_option("--stats", c.stats, "stats CSV path (default: stdout)");
  sub->add_option("--trace", c.trace, "dump the access trace as CSV");
  sub->add_option("--r,--capacity", c.R, "compaction bound R in cells (0 = N/8)")->capture_default_str();
}

struct Prepared {
  MemConfig cfg;
  std::unique_ptr<Sandbox> box;
  Region A;
  std::vector<Cell> cells;
  std::uint64_t R = 0;
};

Prepared prepare(const Common& c) {
  Prepared p;
  if (!c.input.empty()) {
    std::ifstream in(c.input);
    if (!in) throw FormatError("cannot open " + c.input);
    p.cells = read_cells(in);
  }
  const std::uint64_t N = c.input.empty() ? c.N : p.cells.size();
  p.cfg = MemConfig{N, c.B, c.M, c.d, c.epsilon};
  p.cfg.validate();
  p.R = c.R != 0 ? c.R : N / 8;
  if (c.input.empty()) p.cells = generate(parse_generator(c.gen), N, p.R, c.seed);
  p.box = std::make_unique<Sandbox>(p.cfg, c.seed, !c.trace.empty());
  p.A = upload(p.box->store, p.cells);
  return p;
}

void write_outputs(const Common& c, const std::string& algo, Prepared& p, bool ok, const std::vector<Cell>& data) {
  if (!c.out.empty()) {
    std::ofstream out(c.out);
    write_cells(out, data);
  }
  if (!c.trace.empty()) {
    std::ofstream t(c.trace);
    p.box->store.trace().write_csv(t);
  }
  const auto& st = p.box->s.stats();
  const ResultRow row{algo, p.cfg.N, p.cfg.M, p.cfg.B, p.R, c.seed, ok, st.reads, st.writes};
  if (c.stats.empty()) {
    write_result_header(std::cout);
    write_result_row(std::cout, row);
  } else {
    std::ofstream s(c.stats);
    write_result_header(s);
    write_result_row(s, row);
  }
}

int finish(bool ok) { return ok ? 0 : 1; }

int run_compaction(const Common& c, const Extra& x, const std::string& algo) {
  Prepared p = prepare(c);
  CompactionResult r;
  if (algo == "compact-tight-sparse") {
    r = tight_sparse(p.box->s, p.A, p.R, TightSparseParams{x.k_iblt, x.delta});
  } else if (algo == "compact-tight") {
    r = compact_tight(p.box->s, p.A, p.R, TightSparseParams{x.k_iblt, x.delta});
  } else if (algo == "compact-loose") {
    LooseParams lp;
    if (x.c0 != 0) lp.c0 = x.c0;
    lp.c1 = x.c1;
    r = loose(p.box->s, p.A, p.R, lp);
  } else {
    LogStarParams lp;
    if (x.c0 != 0) lp.c0 = x.c0;
    if (x.n0 != 0) lp.n0 = x.n0;
    lp.t1 = x.t1;
    r = loose_logstar(p.box->s, p.A, p.R, lp);
  }
  std::cerr << algo << ": " << (r.succeeded ? "succeeded" : "FAILED") << " (" << to_string(r.status) << ", "
            << r.method << "), " << r.count << " items into " << r.output.blocks << " blocks\n";
  write_outputs(c, algo, p, r.succeeded, download(p.box->store, r.output));
  return finish(r.succeeded);
}

int run_select(const Common& c, const Extra& x) {
  Prepared p = prepare(c);
  const std::uint64_t k = x.k < 0 ? (p.cfg.N + 1) / 2 : static_cast<std::uint64_t>(x.k);
  if (x.k == 0) throw PreconditionViolation("select requires 1 <= k <= N");
  const SelectResult r = select(p.box->s, p.A, k);
  std::cerr << "select k=" << k << ": " << (r.succeeded ? "succeeded" : "FAILED") << " (" << to_string(r.status)
            << ")";
  if (r.succeeded) std::cerr << ", value " << r.value.key() << " (origin " << r.value.origin() << ")";
  std::cerr << '\n';
  write_outputs(c, "select", p, r.succeeded, r.succeeded ? std::vector<Cell>{r.value} : std::vector<Cell>{});
  return finish(r.succeeded);
}

int run_quantiles(const Common& c, const Extra& x) {
  Prepared p = prepare(c);
  const std::uint64_t q = x.q != 0 ? x.q : DealParams::make(p.cfg).q;
  const QuantileResult r = quantiles(p.box->s, p.A, q);
  std::cerr << "quantiles q=" << q << ": " << (r.succeeded ? "succeeded" : "FAILED") << " ("
            << to_string(r.status) << ")";
  if (r.succeeded) {
    for (const auto& v : r.values) std::cerr << ' ' << v.key();
  }
  std::cerr << '\n';
  write_outputs(c, "quantiles", p, r.succeeded, r.succeeded ? r.values : std::vector<Cell>{});
  return finish(r.succeeded);
}

int run_sort(const Common& c, const Extra& x) {
  Prepared p = prepare(c);
  PaddedSortParams sp;
  sp.c_deal = x.c_deal;
  if (x.n0 != 0) sp.n0_cells = x.n0;
  const PaddedSortResult r = padded_sort(p.box->s, p.A, sp);
  std::cerr << "sort: " << (r.succeeded ? "succeeded" : "FAILED") << ", depth " << r.depth << ", " << r.leaves
            << " leaves, " << r.failed_subproblems << " failed subproblems\n";
  write_outputs(c, "sort", p, r.succeeded, download(p.box->store, r.output));
  return finish(r.succeeded);
}

std::ostream& report_stream(const std::string& path, std::ofstream& file) {
  if (path.empty()) return std::cout;
  file.open(path);
  return file;
}

CatalogParams catalog_params(const Common& c, const Extra& x) {
  CatalogParams cp;
  cp.R = c.R;
  cp.k = x.k > 0 ? static_cast<std::uint64_t>(x.k) : 0;
  cp.q = x.q;
  cp.sparse = TightSparseParams{x.k_iblt, x.delta};
  if (x.c0 != 0) cp.loose.c0 = x.c0;
  cp.loose.c1 = x.c1;
  if (x.c0 != 0) cp.logstar.c0 = x.c0;
  if (x.n0 != 0) cp.logstar.n0 = x.n0;
  cp.logstar.t1 = x.t1;
  cp.sort.c_deal = x.c_deal;
  return cp;
}

int run_verify(const Common& c, const Extra& x) {
  const CatalogEntry& e = find_algorithm(x.algo);
  const MemConfig cfg{c.N, c.B, c.M, c.d, c.epsilon};
  cfg.validate();
  const CatalogParams cp = catalog_params(c, x);
  std::vector<std::uint64_t> seeds(x.seeds);
  std::iota(seeds.begin(), seeds.end(), c.seed);
  const auto rep = verify_oblivious(
      e.name, cfg, seeds, x.inputs, [&](std::mt19937_64& rng) { return e.gen(rng, cfg, cp); },
      [&](ClientSession& s, Region A) { e.run(s, A, cp); });
  std::ofstream file;
  write_oblivious_report(report_stream(x.report, file), {rep});
  std::cerr << "verify " << e.name << ": " << (rep.all_equal ? "all traces equal" : "traces DIVERGE");
  if (rep.first_divergence) std::cerr << " at event " << *rep.first_divergence;
  std::cerr << " (" << rep.seeds << " seeds, " << rep.pairs << " pairs)\n";
  return finish(rep.all_equal);
}

int run_scale(const Common& c, const Extra& x) {
  const CatalogEntry& e = find_algorithm(x.algo);
  ScalingModel model = e.model;
  if (x.model == "linear") model = ScalingModel::Linear;
  else if (x.model == "n_log_m_n") model = ScalingModel::NLogMN;
  else if (x.model == "n_log2_n") model = ScalingModel::NLog2N;
  else if (!x.model.empty()) throw PreconditionViolation("unknown model `" + x.model + "`");
  if (x.step == 0 || x.min_log > x.max_log) throw PreconditionViolation("scale requires min-log <= max-log, step >= 1");
  const CatalogParams cp = catalog_params(c, x);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> series;
  for (unsigned lg = x.min_log; lg <= x.max_log; lg += x.step) {
    const MemConfig cfg{std::uint64_t{1} << lg, c.B, c.M, c.d, c.epsilon};
    cfg.validate();
    Sandbox box(cfg, c.seed, false);
    std::mt19937_64 rng(c.seed);
    const Region A = upload(box.store, e.gen(rng, cfg, cp));
    e.run(box.s, A, cp);
    series.emplace_back(cfg.N, box.s.stats().total());
  }
  const auto rep = fit_scaling(e.name, c.B, c.M, series, model);
  std::ofstream file;
  write_scaling_report(report_stream(x.report, file), {rep});
  std::cerr << "scale " << e.name << " (" << to_string(model) << "): drift " << rep.drift_per_doubling * 100
            << "% per doubling" << (rep.flagged ? " FLAGGED" : "") << '\n';
  return finish(!rep.flagged);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-oblivious external-memory compaction, selection and sorting"};
  app.require_subcommand(1);
  Common c;
  Extra x;

  std::vector<std::string> compaction = {"compact-tight-sparse", "compact-tight", "compact-loose", "compact-logstar"};
  std::string chosen;
  for (const auto& name : compaction) {
    auto* sub = app.add_subcommand(name, "compact the distinguished cells");
    add_common(sub, c);
    sub->add_option("--k-iblt", x.k_iblt, "IBLT hash functions")->capture_default_str();
    sub->add_option("--delta", x.delta, "IBLT rows per capacity block")->capture_default_str();
    sub->add_option("--c0", x.c0, "thinning passes (0 = default)")->capture_default_str();
    sub->add_option("--c1", x.c1, "region length factor (0 = d + 2)")->capture_default_str();
    sub->add_option("--n0", x.n0, "log-star base case in blocks (0 = default)")->capture_default_str();
    sub->add_option("--t1", x.t1, "first tower term")->capture_default_str();
  }
  auto* sel = app.add_subcommand("select", "k-th smallest cell");
  add_common(sel, c);
  sel->add_option("--k", x.k, "target rank, 1..N (default ceil(N/2))");
  auto* qua = app.add_subcommand("quantiles", "q quantiles");
  add_common(qua, c);
  qua->add_option("--q", x.q, "quantile count (0 = floor((M/B)^{1/4}))")->capture_default_str();
  auto* srt = app.add_subcommand("sort", "randomized padded sort");
  add_common(srt, c);
  srt->add_option("--c-deal", x.c_deal, "deal constant")->capture_default_str();
  srt->add_option("--n0", x.n0, "direct-sort threshold in cells (0 = default)")->capture_default_str();
  auto* ver = app.add_subcommand("verify", "compare traces across inputs");
  add_common(ver, c);
  ver->add_option("--algo", x.algo, "algorithm name")->required();
  ver->add_option("--seeds", x.seeds, "number of seeds")->capture_default_str();
  ver->add_option("--inputs", x.inputs, "inputs per seed")->capture_default_str();
  ver->add_option("--report", x.report, "oblivious_report.csv path (default: stdout)");
  ver->add_option("--k", x.k, "selection rank");
  ver->add_option("--q", x.q, "quantile count");
  auto* sca = app.add_subcommand("scale", "fit I/O counts over a size grid");
  add_common(sca, c);
  sca->add_option("--algo", x.algo, "algorithm name")->required();
  sca->add_option("--min-log", x.min_log, "smallest log2 N")->capture_default_str();
  sca->add_option("--max-log", x.max_log, "largest log2 N")->capture_default_str();
  sca->add_option("--step", x.step, "log2 step")->capture_default_str();
  sca->add_option("--model", x.model, "linear|n_log_m_n|n_log2_n (default: per algorithm)");
  sca->add_option("--report", x.report, "scaling_report.csv path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    for (const auto& name : compaction) {
      if (app.got_subcommand(name)) return run_compaction(c, x, name);
    }
    if (app.got_subcommand("select")) return run_select(c, x);
    if (app.got_subcommand("quantiles")) return run_quantiles(c, x);
    if (app.got_subcommand("sort")) return run_sort(c, x);
    if (app.got_subcommand("verify")) return run_verify(c, x);
    if (app.got_subcommand("scale")) return run_scale(c, x);
  } catch (const PreconditionViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ModelError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
