#include "oblivext/harness.hpp"

#include <algorithm>
#include <boost/math/distributions/binomial.hpp>
#include <cmath>
#include <ostream>

#include "oblivext/io.hpp"

namespace oblivext {

Sandbox::Sandbox(const MemConfig& cfg, std::uint64_t seed, bool record_trace)
    : store(cfg.B, 0), s(cfg, seed, store) {
  store.set_trace_recording(record_trace);
}

// ---------------------------------------------------------------------------
// Obliviousness
// ---------------------------------------------------------------------------

OblivinessReport verify_oblivious(const std::string& algo, const MemConfig& cfg,
                                  const std::vector<std::uint64_t>& seeds, std::uint64_t inputs_per_seed,
                                  const InputGen& gen, const Algorithm& run, std::uint64_t data_seed) {
  OblivinessReport rep;
  rep.algo = algo;
  rep.cfg = cfg;
  if (inputs_per_seed == 0) return rep;
  for (const std::uint64_t seed : seeds) {
    ++rep.seeds;
    std::optional<AccessTrace> reference;
    for (std::uint64_t j = 0; j < inputs_per_seed; ++j) {
      std::seed_seq sq{data_seed, seed, j};
      std::mt19937_64 rng(sq);
      Sandbox box(cfg, seed);
      const Region A = upload(box.store, gen(rng));
      run(box.s, A);
      rep.peak_cache = std::max(rep.peak_cache, box.s.peak_cache());
      if (!reference) {
        reference = box.store.trace_snapshot();
        rep.trace_length = std::max<std::uint64_t>(rep.trace_length, reference->size());
        continue;
      }
      ++rep.pairs;
      if (const auto d = reference->first_divergence(box.store.trace())) {
        if (rep.all_equal) rep.first_divergence = *d;
        rep.all_equal = false;
      }
    }
  }
  return rep;
}

void quicksort_control(ClientSession& s, Region A) {
  const std::uint64_t B = s.B();
  auto get = [&](std::uint64_t i) { return s.read(A.at(i / B))->cells[i % B]; };
  auto set = [&](std::uint64_t i, const Cell& c) {
    auto b = s.read(A.at(i / B));
    b->cells[i % B] = c;
    s.write(A.at(i / B), *b);
  };
  // Explicit stack, smaller side first, Lomuto partition around the last cell.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> todo{{0, A.blocks * B}};
  while (!todo.empty()) {
    auto [lo, hi] = todo.back();
    todo.pop_back();
    if (hi - lo < 2) continue;
    const Cell pivot = get(hi - 1);
    std::uint64_t store = lo;
    for (std::uint64_t i = lo; i + 1 < hi; ++i) {
      const Cell c = get(i);
      if (key_less(c, pivot)) {
        if (i != store) {
          const Cell t = get(store);
          set(store, c);
          set(i, t);
        }
        ++store;
      }
    }
    const Cell t = get(store);
    set(store, pivot);
    set(hi - 1, t);
    std::pair<std::uint64_t, std::uint64_t> left{lo, store}, right{store + 1, hi};
    if (left.second - left.first < right.second - right.first) std::swap(left, right);
    todo.push_back(left);
    todo.push_back(right);
  }
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

OracleSummary oracle_check(const std::string& algo, std::uint64_t instances,
                           const std::function<OracleOutcome(std::uint64_t)>& trial) {
  OracleSummary sum;
  sum.algo = algo;
  for (std::uint64_t i = 0; i < instances; ++i) {
    const OracleOutcome o = trial(i);
    ++sum.instances;
    if (!o.succeeded) {
      ++sum.failed;
      continue;
    }
    ++sum.succeeded;
    if (!o.matches) ++sum.mismatches;
  }
  return sum;
}

std::vector<Cell> oracle_filter(const std::vector<Cell>& cells) {
  std::vector<Cell> out;
  std::copy_if(cells.begin(), cells.end(), std::back_inserter(out),
               [](const Cell& c) { return c.occupied() && c.distinguished(); });
  return out;
}

std::vector<Cell> oracle_sort(const std::vector<Cell>& cells) {
  std::vector<Cell> out;
  std::copy_if(cells.begin(), cells.end(), std::back_inserter(out), [](const Cell& c) { return c.occupied(); });
  std::sort(out.begin(), out.end(), [](const Cell& a, const Cell& b) {
    return std::make_pair(a.key(), a.origin()) < std::make_pair(b.key(), b.origin());
  });
  return out;
}

Cell oracle_rank(const std::vector<Cell>& cells, std::uint64_t k) { return oracle_sort(cells).at(k - 1); }

std::vector<std::pair<std::int64_t, std::uint64_t>> item_ids(const std::vector<Cell>& cells) {
  std::vector<std::pair<std::int64_t, std::uint64_t>> out;
  for (const auto& c : cells) {
    if (c.occupied()) out.emplace_back(c.key(), c.origin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rates and fits
// ---------------------------------------------------------------------------

double binomial_ucb(std::uint64_t failures, std::uint64_t runs, double confidence) {
  if (runs == 0) return 1.0;
  using boost::math::binomial_distribution;
  return binomial_distribution<>::find_upper_bound_on_p(static_cast<double>(runs), static_cast<double>(failures),
                                                       1.0 - confidence);
}

std::string_view to_string(ScalingModel m) {
  switch (m) {
    case ScalingModel::Linear: return "linear";
    case ScalingModel::NLogMN: return "n_log_m_n";
    case ScalingModel::NLog2N: return "n_log2_n";
  }
  return "unknown";
}

double model_value(ScalingModel model, double n, double m) {
  switch (model) {
    case ScalingModel::Linear: return n;
    case ScalingModel::NLogMN: return n * std::max(1.0, std::log(n) / std::log(std::max(m, 2.0)));
    case ScalingModel::NLog2N: {
      const double l = std::max(1.0, std::log2(n));
      return n * l * l;
    }
  }
  return n;
}

ScalingReport fit_scaling(const std::string& algo, std::uint64_t B, std::uint64_t M,
                          const std::vector<std::pair<std::uint64_t, std::uint64_t>>& series, ScalingModel model,
                          double drift_limit) {
  if (series.size() < 4) throw PreconditionViolation("fit_scaling requires at least four sizes");
  const double step = static_cast<double>(series[1].first) / static_cast<double>(series[0].first);
  for (std::size_t i = 1; i < series.size(); ++i) {
    const double r = static_cast<double>(series[i].first) / static_cast<double>(series[i - 1].first);
    if (step <= 1.0 || std::abs(r - step) > 1e-9 * step) {
      throw PreconditionViolation("fit_scaling requires sizes in geometric progression");
    }
  }
  ScalingReport rep;
  rep.algo = algo;
  rep.model = model;
  const double m = static_cast<double>(M) / static_cast<double>(B);
  double num = 0, den = 0;
  for (const auto& [N, ios] : series) {
    ScalingPoint p;
    p.N = N;
    p.ios = ios;
    p.model = model_value(model, static_cast<double>(N) / static_cast<double>(B), m);
    p.ratio = static_cast<double>(ios) / p.model;
    num += static_cast<double>(ios) * p.model;
    den += p.model * p.model;
    rep.points.push_back(p);
  }
  rep.fitted_constant = num / den;
  rep.monotone_growth = true;
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    const auto& p = rep.points[i];
    const double fit = rep.fitted_constant * p.model;
    const double io = static_cast<double>(p.ios);
    rep.max_residual_ratio = std::max(rep.max_residual_ratio, std::max(io / fit, fit / io));
    if (i > 0 && p.ratio <= rep.points[i - 1].ratio) rep.monotone_growth = false;
  }
  const double doublings = std::log2(static_cast<double>(series.back().first) / static_cast<double>(series.front().first));
  rep.drift_per_doubling = std::pow(rep.points.back().ratio / rep.points.front().ratio, 1.0 / doublings) - 1.0;
  rep.flagged = rep.drift_per_doubling >= drift_limit;
  return rep;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

void write_oblivious_report(std::ostream& out, const std::vector<OblivinessReport>& reports) {
  out << "algo,N,M,B,seeds,pairs,all_equal,first_divergence,trace_length,peak_cache,version\n";
  for (const auto& r : reports) {
    out << r.algo << ',' << r.cfg.N << ',' << r.cfg.M << ',' << r.cfg.B << ',' << r.seeds << ',' << r.pairs << ','
        << (r.all_equal ? 1 : 0) << ',';
    if (r.first_divergence) out << *r.first_divergence;
    out << ',' << r.trace_length << ',' << r.peak_cache << ',' << kFormatVersion << '\n';
  }
}

void write_scaling_report(std::ostream& out, const std::vector<ScalingReport>& reports) {
  out << "algo,model,N,ios,model_value,ratio,fitted_constant,max_residual_ratio,drift_per_doubling,flagged,version\n";
  for (const auto& r : reports) {
    for (const auto& p : r.points) {
      out << r.algo << ',' << to_string(r.model) << ',' << p.N << ',' << p.ios << ',' << p.model << ',' << p.ratio
          << ',' << r.fitted_constant << ',' << r.max_residual_ratio << ',' << r.drift_per_doubling << ','
          << (r.flagged ? 1 : 0) << ',' << kFormatVersion << '\n';
    }
  }
}

void write_failure_rates(std::ostream& out, const std::vector<RateGate>& gates) {
  out << "algo,N,runs,failures,rate,ucb95,bound,pass_point,pass_ucb,version\n";
  for (const auto& g : gates) {
    out << g.algo << ',' << g.N << ',' << g.runs << ',' << g.failures << ',' << g.rate() << ',' << g.ucb95() << ','
        << g.bound << ',' << (g.pass_point() ? 1 : 0) << ',' << (g.pass_ucb() ? 1 : 0) << ',' << kFormatVersion
        << '\n';
  }
}

}  // namespace oblivext
