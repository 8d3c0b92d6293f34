#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "shortint/config.hpp"
#include "shortint/dirichlet.hpp"
#include "shortint/multfun.hpp"
#include "shortint/primes.hpp"
#include "shortint/report.hpp"
#include "shortint/restrict.hpp"
#include "shortint/segment_cache.hpp"
#include "shortint/shortwin.hpp"
#include "shortint/sieve.hpp"

#ifndef SHORTINT_VERSION
#define SHORTINT_VERSION "0.0.0"
#endif

namespace shortint {

struct RunContext {
  const ExperimentConfig& cfg;
  bool strict = false;
  Threads threads{};
  std::unique_ptr<SegmentCache> cache;
  std::mutex cache_mutex;

  RunContext(const ExperimentConfig& c, bool s) : cfg(c), strict(s), threads{c.threads} {
    if (!c.cache_dir.empty()) cache = std::make_unique<SegmentCache>(c.cache_dir);
  }

  CheckRow bound(const std::string& id, double lhs, double rhs, std::string note = {}) const {
    return bound_row(id, lhs, rhs, cfg.envelope_for(id), strict, std::move(note));
  }
};

namespace detail {

inline std::string xs(std::uint64_t x) { return std::to_string(x); }

inline double normalizer_value(const ExperimentConfig& c, const MultiplicativeFunctionSpec& spec,
                               const PrimeTable& primes) {
  switch (c.normalizer) {
    case NormalizerKind::logk: return std::pow(std::log(static_cast<double>(c.X)), static_cast<double>(c.k) - 1.0);
    case NormalizerKind::pf: return mertens_product(spec, c.X, primes);
    case NormalizerKind::one: return 1.0;
  }
  return 1.0;
}

struct T0Choice {
  double t0 = 0;
  std::string how;
};

/// primes must reach X when the mode is auto.
inline T0Choice resolve_t0(const RunContext& ctx, const MultiplicativeFunctionSpec& spec, std::uint64_t X,
                           const PrimeTable& primes) {
  switch (ctx.cfg.t0_mode) {
    case T0Mode::zero: return {0.0, "zero"};
    case T0Mode::fixed: return {ctx.cfg.t0_value, "fixed"};
    case T0Mode::automatic: {
      T0Options opt;
      opt.threads = ctx.threads;
      const auto prof = find_t0(spec, X, primes, opt);
      return {prof.t0, "auto:" + prof.reason};
    }
  }
  return {};
}

inline ValueTable build_table(const RunContext& ctx, const MultiplicativeFunctionSpec& spec, std::uint64_t h_max,
                              double t0, const PrimeTable& primes) {
  ValueTableOptions opt;
  opt.h_max = h_max;
  opt.t0 = t0;
  opt.threads = ctx.threads;
  return ValueTable::build(spec, ctx.cfg.X, primes, opt);
}

inline ScanOptions scan_options(const RunContext& ctx, double t0, double normalizer) {
  ScanOptions o;
  o.t0 = t0;
  o.centering = t0 == 0.0 ? Centering::plain : Centering::twisted;
  o.normalizer = normalizer;
  o.etas = {ctx.cfg.eta};
  o.keep_delta = false;
  o.threads = ctx.threads;
  return o;
}

inline std::uint64_t max_of(const std::vector<std::uint64_t>& v) {
  return v.empty() ? 0 : *std::max_element(v.begin(), v.end());
}

}  // namespace detail

// ------------------------------------------------------------------ sieve

inline ExperimentResult run_sieve(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const std::uint64_t X = cfg.X;
  ExperimentResult r;
  r.experiment = "sieve";
  const auto primes = make_prime_table(std::max<std::uint64_t>(isqrt(X) + 1, 1000));

  json sums = json::array();
  for (std::uint64_t x : std::set<std::uint64_t>{1000, 100'000, X}) {
    if (x > X) continue;
    const auto s = sieve_divisor_sum(x, ctx.threads), o = divisor_sum_hyperbola(x);
    r.checks.push_back(identity_row("divisor_sum_x" + detail::xs(x), s == o, static_cast<double>(s),
                                    static_cast<double>(o), "sieve against the hyperbola method"));
    sums.push_back({{"x", x}, {"sieve", s}, {"hyperbola", o}});
  }
  json two = json::array();
  for (std::uint64_t x : {std::uint64_t{1000}, std::uint64_t{1'000'000}}) {
    if (x > X) continue;
    const auto s = sieve_kpow_omega_sum(x, 2, ctx.threads), o = squarefree_harmonic_oracle(x);
    r.checks.push_back(identity_row("two_pow_omega_x" + detail::xs(x), s == o, static_cast<double>(s),
                                    static_cast<double>(o), "sieve against the squarefree divisor oracle"));
    two.push_back({{"x", x}, {"sieve", s}, {"oracle", o}});
  }
  r.summary["divisor_sums"] = sums;
  r.summary["two_pow_omega_sums"] = two;

  // Factorizations and derived arrays against trial division.
  const std::uint64_t N = std::min<std::uint64_t>(X, 100'000);
  const auto seg = build_segment(1, N + 1, *primes, {}, kAllArrays);
  std::uint64_t bad = 0;
  for (std::uint64_t n = 1; n <= N; ++n) {
    const auto fv = trial_division_factor(n);
    const auto sf = seg.factor(n);
    bool ok = fv == sf && seg.big_omega(n) == big_omega(fv) && seg.small_omega(n) == small_omega(fv) &&
              seg.mu_squared(n) == is_squarefree(fv);
    for (unsigned k = 1; k <= 5 && ok; ++k) ok = dk_value(sf, k) == dk_value(fv, k);
    bad += !ok;
  }
  r.checks.push_back(identity_row("trial_division_oracle", bad == 0, static_cast<double>(bad), 0.0,
                                  "mismatching n <= " + detail::xs(N)));

  // d_k = d_{k-1} * 1 by summing over multiples.
  const std::uint64_t M = std::min<std::uint64_t>(X, 10'000);
  std::uint64_t conv_bad = 0;
  std::vector<std::uint64_t> prev(M + 1, 1);
  for (unsigned k = 2; k <= 5; ++k) {
    std::vector<std::uint64_t> conv(M + 1, 0);
    for (std::uint64_t d = 1; d <= M; ++d) {
      for (std::uint64_t m = d; m <= M; m += d) conv[m] += prev[d];
    }
    for (std::uint64_t n = 1; n <= M; ++n) conv_bad += conv[n] != dk_value(seg.factor(n), k);
    prev = conv;
  }
  r.checks.push_back(identity_row("dk_convolution", conv_bad == 0, static_cast<double>(conv_bad), 0.0,
                                  "mismatches over k = 2..5, n <= " + detail::xs(M)));

  // omega histogram over [1, X] from (possibly cached) segments.
  const std::uint16_t arrays = kBigOmegaArray | kSmallOmegaArray | kMuSquaredArray;
  struct Hist {
    std::vector<std::uint64_t> count;
    std::vector<NeumaierSum> weighted;
    std::uint64_t two_pow = 0, squarefree = 0;
  };
  const double kd = static_cast<double>(cfg.k);
  const SieveConfig sc{cfg.segment_size};
  auto parts = map_chunks<Hist>(ChunkPlan{1, X + 1, cfg.segment_size}, ctx.threads, [&](std::uint64_t a, std::uint64_t b) {
    SieveSegment s;
    if (ctx.cache) {
      std::lock_guard<std::mutex> lock(ctx.cache_mutex);
      s = ctx.cache->load_or_build(a, b, *primes, sc, arrays);
    } else {
      s = build_segment(a, b, *primes, sc, arrays);
    }
    Hist h;
    for (std::uint64_t n = a; n < b; ++n) {
      const unsigned w = s.small_omega(n);
      if (h.count.size() <= w) {
        h.count.resize(w + 1, 0);
        h.weighted.resize(w + 1);
      }
      ++h.count[w];
      h.weighted[w] += std::pow(kd, static_cast<double>(s.big_omega(n)));
      h.two_pow += std::uint64_t{1} << w;
      h.squarefree += s.mu_squared(n);
    }
    return h;
  });
  Hist total;
  for (auto& p : parts) {
    if (total.count.size() < p.count.size()) {
      total.count.resize(p.count.size(), 0);
      total.weighted.resize(p.count.size());
    }
    for (std::size_t w = 0; w < p.count.size(); ++w) {
      total.count[w] += p.count[w];
      total.weighted[w].merge(p.weighted[w]);
    }
    total.two_pow += p.two_pow;
    total.squarefree += p.squarefree;
  }
  const auto direct = sieve_kpow_omega_sum(X, 2, ctx.threads);
  r.checks.push_back(identity_row("segment_two_pow_omega", total.two_pow == direct, static_cast<double>(total.two_pow),
                                  static_cast<double>(direct), "segment arrays against the direct sieve over [1, X]"));
  Table hist{{"omega", "count", "weighted_count"}, {}};
  for (std::size_t w = 0; w < total.count.size(); ++w) {
    hist.add({static_cast<std::uint64_t>(w), total.count[w], total.weighted[w].value()});
  }
  r.tables["omega_histogram"] = std::move(hist);
  r.summary["X"] = X;
  r.summary["squarefree_count"] = total.squarefree;
  r.summary["two_pow_omega_sum"] = total.two_pow;
  r.summary["histogram_weight"] = "k^Omega(n) with k = " + std::to_string(cfg.k);
  return r;
}

// ------------------------------------------------------- short windows

inline ExperimentResult run_scan(RunContext& ctx, bool exceptional_only) {
  const auto& cfg = ctx.cfg;
  ExperimentResult r;
  r.experiment = exceptional_only ? "exceptional" : "scan";
  const auto spec = spec_from_name(cfg.spec_name);
  const auto primes = make_prime_table(cfg.X);
  const auto t0 = detail::resolve_t0(ctx, spec, cfg.X, *primes);
  const double norm = detail::normalizer_value(cfg, spec, *primes);
  const auto table = detail::build_table(ctx, spec, detail::max_of(cfg.h_grid), t0.t0, *primes);
  const auto opt = detail::scan_options(ctx, t0.t0, norm);
  Table tidy = tidy_table();
  Table exc{{"X", "h", "eta", "exceptional_fraction"}, {}};
  for (auto h : cfg.h_grid) {
    const auto s = discrepancy_profile(table, h, opt);
    const double frac = s.exceptional.front().second;
    exc.add({cfg.X, h, cfg.eta, frac});
    const std::pair<const char*, double> stats[] = {
        {"mean_delta_re", s.mean_delta.real()}, {"mean_delta_im", s.mean_delta.imag()}, {"mean_abs", s.mean_abs},
        {"l2", s.l2}, {"max_abs", s.max_abs}, {"p50", s.p50}, {"p90", s.p90}, {"p99", s.p99},
        {"exceptional_fraction", frac}};
    for (const auto& [name, value] : stats) tidy.add({cfg.X, h, std::string(name), value});
    r.checks.push_back(trend_row("exceptional_fraction_h" + detail::xs(h), frac, 0.0,
                                 "expected to shrink as h grows past the threshold; finite X only"));
  }
  if (exceptional_only) r.tables["exceptional"] = std::move(exc);
  else r.tables["scan"] = std::move(tidy);
  r.summary["X"] = cfg.X;
  r.summary["spec"] = spec.name;
  r.summary["t0"] = t0.t0;
  r.summary["t0_mode"] = t0.how;
  r.summary["normalizer"] = norm;
  r.summary["eta"] = cfg.eta;
  r.summary["h_threshold"] = h_threshold(spec, cfg.X, cfg.eps, *primes);
  r.summary["long_mean_re"] = (t0.t0 == 0.0 ? table.long_plain() : table.long_twisted()).real();
  r.summary["long_mean_im"] = (t0.t0 == 0.0 ? table.long_plain() : table.long_twisted()).imag();
  return r;
}

inline ExperimentResult run_variance(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  ExperimentResult r;
  r.experiment = "variance";
  const auto spec = spec_from_name(cfg.spec_name);
  const auto primes = make_prime_table(cfg.X);
  const auto t0 = detail::resolve_t0(ctx, spec, cfg.X, *primes);
  const auto table = detail::build_table(ctx, spec, detail::max_of(cfg.h_grid), t0.t0, *primes);
  const Centering mode = t0.t0 == 0.0 ? Centering::plain : Centering::twisted;
  Table t{{"X", "h", "l2", "h_times_l2"}, {}};
  std::vector<std::uint64_t> hs = cfg.h_grid;
  std::vector<double> l2, hl2;
  for (auto h : hs) {
    const double v = l2_variance(table, h, t0.t0, mode, ctx.threads);
    l2.push_back(v);
    hl2.push_back(static_cast<double>(h) * v);
    t.add({cfg.X, h, v, hl2.back()});
  }
  r.tables["variance"] = std::move(t);

  // Order along increasing h, for the trend rows.
  std::vector<std::size_t> order(hs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return hs[a] < hs[b]; });
  std::uint64_t increases = 0;
  for (std::size_t i = 1; i < order.size(); ++i) increases += !(l2[order[i]] < l2[order[i - 1]]);
  r.checks.push_back(trend_row("l2_decreasing_in_h", static_cast<double>(increases), 0.0,
                               "count of non-decreasing steps along increasing h"));
  std::vector<double> sorted = hl2;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted.empty() ? 0.0
                                       : (sorted.size() % 2 ? sorted[sorted.size() / 2]
                                                            : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]));
  double spread = 0;
  for (double v : hl2) spread = std::max(spread, std::max(v / median, median / v));
  r.checks.push_back(trend_row("h_l2_spread_about_median", spread, 1.0,
                               "max over h of the factor between h*l2 and its median; near 1 in the 1/h regime"));
  r.summary["X"] = cfg.X;
  r.summary["spec"] = spec.name;
  r.summary["t0"] = t0.t0;
  r.summary["h_l2_median"] = median;
  return r;
}

struct ThresholdRow {
  double exponent = 0;
  std::uint64_t h = 0;
  bool skipped = false;
  double exceptional_fraction = 0, vanish_fraction = 0, concentrated_dk_mass = 0;
};

struct ThresholdScan {
  std::vector<ThresholdRow> rows;
  double critical_exponent = 0;  // k log k - k + 1
  double l2_exponent = 0;        // (k - 1)^2
  double eps_prime = 0;
  double normalizer = 1;
};

/// h = ceil((log X)^e) per exponent; rows with h >= X are flagged and skipped.
/// Exceptional fractions use the plain centering with normalizer log^{k-1} X.
inline ThresholdScan threshold_scan(std::uint64_t X, unsigned k, const std::vector<double>& exponents, double eta,
                                    double eps_prime, const MultiplicativeFunctionSpec& spec, const PrimeTable& primes,
                                    Threads threads = {}) {
  if (exponents.empty()) throw ParameterError("threshold scan needs exponents");
  ThresholdScan out;
  const double kd = static_cast<double>(k), L = std::log(static_cast<double>(X));
  out.critical_exponent = kd * std::log(kd) - kd + 1.0;
  out.l2_exponent = (kd - 1.0) * (kd - 1.0);
  out.eps_prime = eps_prime;
  out.normalizer = std::pow(L, kd - 1.0);
  std::vector<std::uint64_t> hs;
  for (double e : exponents) {
    ThresholdRow row;
    row.exponent = e;
    const double hd = std::ceil(std::pow(L, e));
    row.skipped = !(hd < static_cast<double>(X));
    row.h = row.skipped ? X : static_cast<std::uint64_t>(hd);
    if (!row.skipped) hs.push_back(row.h);
    out.rows.push_back(row);
  }
  if (hs.empty()) return out;
  std::vector<std::uint64_t> uniq = hs;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  const auto inv = inverse_threshold_experiment(X, k, eps_prime, uniq, primes, threads);
  {
    ValueTableOptions vo;
    vo.h_max = uniq.back();
    vo.threads = threads;
    const auto table = ValueTable::build(spec, X, primes, vo);
    ScanOptions so;
    so.centering = Centering::plain;
    so.normalizer = out.normalizer;
    so.etas = {eta};
    so.keep_delta = false;
    so.threads = threads;
    for (auto& row : out.rows) {
      if (row.skipped) continue;
      const std::size_t i = std::lower_bound(uniq.begin(), uniq.end(), row.h) - uniq.begin();
      row.vanish_fraction = inv.rows[i].vanish_fraction;
      row.concentrated_dk_mass = inv.rows[i].concentrated_dk_mass;
      // Reuse the fraction for repeated h.
      bool done = false;
      for (const auto& prev : out.rows) {
        if (&prev == &row) break;
        if (!prev.skipped && prev.h == row.h) {
          row.exceptional_fraction = prev.exceptional_fraction;
          done = true;
          break;
        }
      }
      if (!done) row.exceptional_fraction = discrepancy_profile(table, row.h, so).exceptional.front().second;
    }
  }
  return out;
}

inline ExperimentResult run_threshold(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  ExperimentResult r;
  r.experiment = "threshold";
  const auto spec = spec_from_name(cfg.spec_name);
  const auto primes = make_prime_table(isqrt(3 * cfg.X) + 1000);
  const auto scan = threshold_scan(cfg.X, cfg.k, cfg.exponents, cfg.eta, cfg.eps_prime, spec, *primes, ctx.threads);
  Table t{{"exponent", "h", "exceptional_fraction", "vanish_fraction"}, {}};
  json rows = json::array(), skipped = json::array();
  for (const auto& row : scan.rows) {
    if (row.skipped) {
      skipped.push_back({{"exponent", row.exponent}, {"reason", "h >= X"}});
      continue;
    }
    t.add({row.exponent, row.h, row.exceptional_fraction, row.vanish_fraction});
    rows.push_back({{"exponent", row.exponent},
                    {"h", row.h},
                    {"exceptional_fraction", row.exceptional_fraction},
                    {"vanish_fraction", row.vanish_fraction},
                    {"concentrated_dk_mass", row.concentrated_dk_mass},
                    {"side", row.exponent < scan.critical_exponent ? "below_critical" : "above_critical"}});
  }
  r.tables["threshold"] = std::move(t);
  r.summary["X"] = cfg.X;
  r.summary["k"] = cfg.k;
  r.summary["spec"] = spec.name;
  r.summary["eta"] = cfg.eta;
  r.summary["eps_prime"] = scan.eps_prime;
  r.summary["normalizer"] = scan.normalizer;
  r.summary["critical_exponent"] = scan.critical_exponent;
  r.summary["l2_exponent"] = scan.l2_exponent;
  r.summary["rows"] = rows;
  r.summary["skipped"] = skipped;

  // Trend rows along increasing exponent.
  std::vector<const ThresholdRow*> live;
  for (const auto& row : scan.rows) {
    if (!row.skipped) live.push_back(&row);
  }
  std::stable_sort(live.begin(), live.end(), [](auto a, auto b) { return a->exponent < b->exponent; });
  if (live.size() >= 2) {
    r.checks.push_back(trend_row("exceptional_drop", live.back()->exceptional_fraction,
                                 live.front()->exceptional_fraction,
                                 "exceptional fraction at the largest exponent over the smallest; finite X only"));
    std::uint64_t breaks = 0;
    for (std::size_t i = 1; i < live.size(); ++i) {
      breaks += live[i - 1]->vanish_fraction < 0.95 * live[i]->vanish_fraction;
    }
    r.checks.push_back(trend_row("vanish_monotone", static_cast<double>(breaks), 0.0,
                                 "places where the vanish fraction rises with the exponent beyond 5% slack"));
  }
  return r;
}

// ----------------------------------------------------------- asymptotics

inline ExperimentResult run_asymptotics(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const std::uint64_t X = cfg.X;
  const unsigned k = cfg.k;
  ExperimentResult r;
  r.experiment = "asymptotics";
  const auto spec = spec_from_name(cfg.spec_name);
  const auto params = default_params(static_cast<double>(X), cfg.eps0);
  const auto primes = make_prime_table(std::max<std::uint64_t>(
      3 * X + 1, static_cast<std::uint64_t>(std::ceil(params.Q2())) + 1));
  const auto euler = make_prime_table(std::max<std::uint64_t>(20'000'000, 3 * X + 1));

  const auto kp = kpow_omega_sum(X, k, *euler, ctx.threads);
  json kj{{"x", X}, {"sum", kp.sum}, {"c_k", kp.c_k}, {"c_k_tail_relative", kp.c_k_tail}, {"normalized", kp.normalized}};
  r.summary["kpow_omega"] = kj;
  if (k == 1 || k == 2) {
    const double target = k == 1 ? 1.0 : 6.0 / (std::numbers::pi * std::numbers::pi);
    r.checks.push_back(constant_row("c_k_euler_product", kp.c_k, target, 1e-6,
                                    k == 1 ? "c_1 = 1" : "c_2 = 6/pi^2"));
  } else {
    r.checks.push_back(trend_row("c_k_euler_product", kp.c_k, 0.0, "no closed form for this k; value recorded"));
  }
  r.checks.push_back(trend_row("kpow_omega_normalized", kp.normalized, kp.c_k,
                               "sum k^omega(n) / (x log^{k-1} x) against c_k; lower-order terms are of relative size "
                               "1/log x at finite x"));

  const auto ds = sieve_divisor_sum(X, ctx.threads);
  const double Xd = static_cast<double>(X), L = std::log(Xd);
  const double main_term = Xd * L + (2.0 * std::numbers::egamma - 1.0) * Xd;
  r.summary["divisor_sum"] = {{"x", X}, {"sum", ds}, {"main_term", main_term}};
  r.checks.push_back(trend_row("divisor_sum_main_term", static_cast<double>(ds), main_term,
                               "error term is O(sqrt x) and recorded only"));

  const auto lit = concentrated_dk_tail(X, k, cfg.eps, *primes, ctx.threads, TailWeight::kpow_big_omega);
  const auto dkt = concentrated_dk_tail(X, k, cfg.eps, *primes, ctx.threads, TailWeight::dk);
  for (const auto* t : {&lit, &dkt}) {
    const std::string name = t == &lit ? "concentrated_tail_kpow" : "concentrated_tail_dk";
    r.summary[name] = {{"lhs", t->lhs}, {"normalized", t->normalized}, {"rankin_rhs", t->rankin_rhs},
                       {"rankin_violations", t->rankin_violations}, {"A", t->A}};
    r.checks.push_back(trend_row(name, t->normalized, 0.0,
                                 "deviant mass over x log^{k-1} x; claimed o(1), measured at one x"));
    r.checks.push_back(identity_row(name + "_rankin", t->rankin_violations == 0,
                                    static_cast<double>(t->rankin_violations), 0.0,
                                    "termwise Rankin majorant never below the weight"));
  }

  const auto conc = omega_concentration_counts(0, X, k, cfg.eps, *primes, ctx.threads);
  Table hist{{"omega", "count", "weighted_count"}, {}};
  for (std::size_t w = 0; w < conc.histogram.size(); ++w) {
    hist.add({static_cast<std::uint64_t>(w), conc.histogram[w], conc.weighted_histogram[w]});
  }
  r.tables["omega_histogram"] = std::move(hist);
  r.summary["concentration"] = {{"typical", conc.typical},         {"deviant", conc.deviant},
                                {"ratio_lower", conc.ratio_lower}, {"ratio_upper", conc.ratio_upper},
                                {"lower_bound", conc.lower_bound}, {"upper_bound", conc.upper_bound}};
  r.checks.push_back(trend_row("concentration_bracket_lower", conc.ratio_lower, 1.0,
                               "typical count over x/(log x)^{(k+eps) log k - k + 1}; constants unspecified"));
  r.checks.push_back(trend_row("concentration_bracket_upper", conc.ratio_upper, 1.0,
                               "typical count over x/(log x)^{(k-eps) log k - k + 1}; constants unspecified"));

  const auto tb = tail_sum_B(spec, X, cfg.eps, cfg.delta, *primes, ctx.threads);
  r.summary["tail_B"] = {{"threshold", tb.threshold}, {"PfX", tb.PfX}, {"excluded", tb.excluded},
                         {"rankin_rhs", tb.rankin_rhs}, {"rankin_violations", tb.rankin_violations}};
  r.checks.push_back(ctx.bound("tail_B", tb.lhs, tb.rhs, "mass of n in (X, 3X] with too many prime factors"));
  r.checks.push_back(identity_row("tail_B_rankin", tb.rankin_violations == 0,
                                  static_cast<double>(tb.rankin_violations), 0.0, "termwise Rankin majorant"));

  const auto ta = tail_sum_A(spec, X, params, *primes, ctx.threads);
  r.summary["restriction_params"] = {{"P1", params.P1()}, {"Q1", params.Q1()}, {"P2", params.P2()},
                                     {"Q2", params.Q2()}, {"eps0", params.eps0}, {"clamped", params.clamped()}};
  r.summary["tail_A"] = {{"density", ta.density}, {"prod1", ta.prod1}, {"prod2", ta.prod2}};
  r.checks.push_back(ctx.bound("tail_A", ta.lhs, ta.rhs_factor, "mass of n in (X, 2X] outside A"));

  const auto sh = shiu_ratio(spec, X, X, std::max<std::uint64_t>(X / 100, isqrt(X) + 1), *primes, 0.5, ctx.threads);
  r.summary["shiu"] = {{"ratio", sh.ratio}, {"window_sum", sh.window_sum}, {"PfX", sh.PfX}};
  r.checks.push_back(ctx.bound("shiu_window", sh.ratio, 1.0, "window mean of |f| over P_f(X)"));

  try {
    const auto rs = rho_sigma(k, cfg.alpha);
    r.summary["rho_sigma"] = {{"rho", rs.rho}, {"sigma", rs.sigma}};
  } catch (const DomainError& e) {
    r.summary["rho_sigma"] = {{"error", e.what()}};
  }
  r.summary["X"] = X;
  r.summary["k"] = k;
  r.summary["spec"] = spec.name;
  r.summary["h_threshold"] = h_threshold(spec, X, cfg.eps, *primes);
  return r;
}

// ---------------------------------------------------------------- halasz

inline ExperimentResult run_halasz(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  ExperimentResult r;
  r.experiment = "halasz";
  const auto spec = spec_from_name(cfg.spec_name);
  const auto primes = make_prime_table(cfg.X);
  T0Options opt;
  opt.threads = ctx.threads;
  const auto prof = find_t0(spec, cfg.X, *primes, opt);
  Table t{{"t", "d2"}, {}};
  for (std::size_t i = 0; i < prof.t_grid.size(); ++i) t.add({prof.t_grid[i], prof.d2_values[i]});
  r.tables["distance_profile"] = std::move(t);
  const double d2_zero = halasz_distance_sq(spec, 0.0, cfg.X, *primes);
  r.checks.push_back(identity_row("t0_not_worse_than_zero", prof.d2_at_t0 <= d2_zero, prof.d2_at_t0, d2_zero,
                                  "D^2 at the minimizer against D^2 at t = 0"));
  r.summary["t0"] = prof.t0;
  r.summary["d2_at_t0"] = prof.d2_at_t0;
  r.summary["d2_at_zero"] = d2_zero;
  r.summary["final_step"] = prof.final_step;
  r.summary["boundary"] = prof.boundary;
  r.summary["reason"] = prof.reason;
  r.summary["nonreal_mass"] = prof.nonreal_mass;
  r.summary["ties"] = prof.ties;

  std::vector<std::pair<double, double>> wz;
  for (double w = 2; w * w <= static_cast<double>(cfg.X); w *= 2) wz.push_back({w, w * w});
  if (!wz.empty()) {
    const auto audit = nonvanishing_audit(spec, cfg.alpha, static_cast<double>(cfg.X), wz, *primes);
    r.summary["nonvanishing"] = {{"worst_margin", audit.worst_margin}, {"worst_w", audit.worst_w},
                                 {"worst_z", audit.worst_z}, {"margins", audit.margins}};
  }
  const double gamma = std::max(1.0, 2.0 / std::log(static_cast<double>(cfg.X)));
  try {
    const auto d = euler_product_diagnostics(spec, prof.t0, gamma, cfg.X, cfg.alpha, *primes);
    r.summary["euler"] = {{"gamma", gamma}, {"ratio_truncated_vs_shifted", d.ratio_34},
                          {"ratio_far_shift", d.ratio_35}, {"tail_relative", d.tail_relative}, {"PfX", d.PfX}};
  } catch (const AccuracyError& e) {
    r.summary["euler"] = {{"error", e.what()}};
  }
  r.summary["X"] = cfg.X;
  r.summary["spec"] = spec.name;
  r.summary["PfX"] = mertens_product(spec, cfg.X, *primes);
  r.summary["h_threshold"] = h_threshold(spec, cfg.X, cfg.eps, *primes);
  return r;
}

// ------------------------------------------------------------- dirichlet

inline ExperimentResult run_dirichlet(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const std::uint64_t X = cfg.X;
  ExperimentResult r;
  r.experiment = "dirichlet";
  const auto spec = spec_from_name(cfg.spec_name);
  const auto primes = make_prime_table(std::max<std::uint64_t>(2 * X + 1, 20'000));

  // A(1 + it) over (X, 2X] on the grid [0, T].
  const auto coeffs = DirichletPoly::from_dense(X + 1, spec_values(spec, X + 1, 2 * X + 1, *primes, ctx.threads));
  const double dt = cfg.points > 1 ? cfg.T / static_cast<double>(cfg.points - 1) : 0.0;
  const auto grid = dpoly_eval(coeffs, 0.0, dt, cfg.points, ctx.threads);
  Table g{{"t", "re", "im", "abs"}, {}};
  for (std::size_t j = 0; j < grid.size(); ++j) {
    g.add({grid.t(j), grid.values[j].real(), grid.values[j].imag(), std::abs(grid.values[j])});
  }
  r.tables["grid"] = std::move(g);

  // Continuous mean value over a short block, where the closed form applies.
  const std::uint64_t Nmv = 500;
  const auto mv_poly = to_meanvalue_form(
      DirichletPoly::from_dense(Nmv + 1, spec_values(spec, Nmv + 1, 2 * Nmv + 1, *primes, ctx.threads)));
  const auto mv = meanvalue_check(mv_poly, cfg.T, 1.0 / (4.0 * std::log(static_cast<double>(2 * Nmv + 1))),
                                  ctx.threads, cfg.envelope_for("mean_value"));
  r.checks.push_back(ctx.bound("mean_value", mv.lhs, mv.rhs, "n in (500, 1000], coefficients conj(f(n))/n"));

  if (X >= 100) {
    const auto corr = henriot_correlation(spec, X, X / 100, 10, 2, 3, *primes, std::nullopt,
                                          cfg.envelope_for("correlation"));
    r.checks.push_back(ctx.bound("correlation", corr.lhs, corr.rhs, "shifts r1 = 2, r2 = 3, K = 10, y = X/100"));
  }
  r.summary["frak_S"] = frak_S(cfg.T, X, spec, cfg.eps, *primes);

  std::vector<double> pts;
  const double Tw = std::min(cfg.T, 400.0);
  for (double t = -Tw; t <= Tw; t += 4.0) pts.push_back(t);
  const auto set = make_well_spaced(pts, Tw);
  const auto dm = discrete_meanvalue_check(coeffs, set, X, cfg.envelope_for("discrete_mean_value"), ctx.threads);
  r.checks.push_back(ctx.bound("discrete_mean_value", dm.lhs, dm.rhs, "points spaced 4 in [-min(T,400), min(T,400)]"));

  const double Pl = 1000, V = 10;
  DirichletPoly pc;
  for (std::uint32_t p : *primes) {
    if (p > 2 * Pl) break;
    if (p > Pl) pc.push(p, spec.at(p, 1));
  }
  const auto lv = large_value_set(pc, Pl, std::max(cfg.T, 2 * Pl), V, spec.bound_k, cfg.envelope_for("large_values"),
                                  ctx.threads);
  r.checks.push_back(ctx.bound("large_values", static_cast<double>(lv.set.size()), lv.bound,
                               "primes in (1000, 2000], V = 10"));
  r.summary["large_values"] = {{"count", lv.set.size()}, {"bound", lv.bound}, {"candidates", lv.candidates}};

  if (X >= 10'000) {
    const double Y1 = 100, Y2 = 10'000;
    const unsigned l = amplification_length(Y1, Y2);
    const double maxn = 2.0 * static_cast<double>(X) / Y2 * std::pow(2.0 * Y1, l);
    const auto am = amplified_meanvalue(spec, Y1, Y2, X, l, 100.0, cfg.eps, 1.0 / (4.0 * std::log(maxn)), *primes,
                                        ctx.threads, cfg.envelope_for("amplified_mean_value"));
    r.checks.push_back(ctx.bound("amplified_mean_value", am.lhs, am.rhs, "Y1 = 100, Y2 = 1e4, T = 100"));
    r.summary["amplified"] = {{"l", am.l}, {"terms", am.terms}};
  }

  RoughOptions ro;
  ro.envelope = cfg.envelope_for("rough_sum");
  const double t_lo = std::pow(std::log(static_cast<double>(X)), ro.sigma0);
  const auto t0 = detail::resolve_t0(ctx, spec, X, *primes);
  const auto rough = rough_restricted_sum(spec, X, 10, 1000, t0.t0, t_lo, 0.5, 200, *primes, ro, ctx.threads);
  r.checks.push_back(ctx.bound("rough_sum", rough.sup_sum, rough.bound_sum, "[10, 1000]-free n, 200 points"));
  r.checks.push_back(ctx.bound("rough_R", rough.sup_R, rough.bound_R, "weighted by 1/(1 + omega_[10,1000](n))"));
  r.summary["rough_t0"] = t0.t0;

  json perron = json::array();
  double first = 0, last = 0;
  for (std::size_t i = 0; i < cfg.perron_t_max.size(); ++i) {
    const auto pc2 = perron_window_check(spec, cfg.perron_x, cfg.perron_h, cfg.perron_t_max[i], 0.01, *primes,
                                         ctx.threads);
    perron.push_back({{"t_max", cfg.perron_t_max[i]}, {"approx_re", pc2.approx.real()},
                      {"approx_im", pc2.approx.imag()}, {"exact", pc2.exact}, {"error", pc2.error},
                      {"panels", pc2.panels}});
    if (i == 0) first = pc2.error;
    last = pc2.error;
  }
  r.summary["perron"] = perron;
  r.checks.push_back(trend_row("perron_error_drop", last, first,
                               "error at the largest t_max over the smallest; decays like 1/t_max with oscillation"));
  r.summary["X"] = X;
  r.summary["spec"] = spec.name;
  r.summary["terms"] = coeffs.size();
  return r;
}

// ---------------------------------------------------------------- ramare

struct SplitPoint {
  double t = 0;
  int cls = 0;  // 1, 2, or 0 for the remainder
  double worst1 = 0, worst2 = 0;  // max over v of |Q_{v,j}| / e^{-alpha_j v/H}
};

/// Classifies grid points by whether every prime block sum Q_{v,j}(1 + i t0 + i t)
/// over [P_j, Q_j] is below e^{-alpha_j v/H}. Diagnostic only.
inline std::vector<SplitPoint> split_classification(const MultiplicativeFunctionSpec& spec,
                                                    const RestrictionParams& rp, double H, double t0,
                                                    const std::vector<double>& t, const PrimeTable& primes,
                                                    Threads threads = {}) {
  const double alpha[2] = {0.25 - 1.0 / 50.0, 0.25 - 1.0 / 100.0};
  struct Block {
    std::int64_t v;
    std::vector<double> logp;
    std::vector<cplx> c;  // f(p)/p
  };
  std::vector<Block> blocks[2];
  const double lo[2] = {rp.P1(), rp.P2()}, hi[2] = {rp.Q1(), rp.Q2()};
  for (int j = 0; j < 2; ++j) {
    if (static_cast<double>(primes.limit()) < hi[j]) throw PreconditionError("prime table does not reach Q_j");
    for (std::uint32_t p : primes) {
      const double pd = p;
      if (pd > hi[j]) break;
      if (pd < lo[j]) continue;
      const double lp = std::log(pd);
      const auto v = static_cast<std::int64_t>(std::floor(H * lp));
      if (blocks[j].empty() || blocks[j].back().v != v) blocks[j].push_back({v, {}, {}});
      blocks[j].back().logp.push_back(lp);
      blocks[j].back().c.push_back(spec.at(p, 1) / pd);
    }
  }
  std::vector<SplitPoint> out(t.size());
  parallel_chunks(t.size(), threads, [&](std::size_t i) {
    SplitPoint sp;
    sp.t = t[i];
    for (int j = 0; j < 2; ++j) {
      double worst = 0;
      for (const auto& b : blocks[j]) {
        ComplexNeumaierSum s;
        for (std::size_t q = 0; q < b.c.size(); ++q) s += b.c[q] * unit_phase(t0 + t[i], b.logp[q]);
        const double thr = std::exp(-alpha[j] * static_cast<double>(b.v) / H);
        worst = std::max(worst, std::abs(s.value()) / thr);
      }
      (j == 0 ? sp.worst1 : sp.worst2) = worst;
    }
    sp.cls = sp.worst1 <= 1.0 ? 1 : sp.worst2 <= 1.0 ? 2 : 0;
    out[i] = sp;
  });
  return out;
}

inline ExperimentResult run_ramare(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const std::uint64_t X = cfg.X;
  ExperimentResult r;
  r.experiment = "ramare";
  const auto spec = spec_from_name(cfg.spec_name);
  const auto rp = default_params(static_cast<double>(X), cfg.eps0);
  const auto primes = make_prime_table(
      std::max<std::uint64_t>(2 * X + 1, static_cast<std::uint64_t>(std::ceil(std::max(rp.Q2(), rp.Q1()))) + 1));

  double P, Q, H;
  RamareRestriction restriction;
  const bool manual = cfg.P || cfg.Q || cfg.H;
  if (manual) {
    if (!(cfg.P && cfg.Q && cfg.H)) throw UsageError("P, Q and H must be given together");
    P = *cfg.P;
    Q = *cfg.Q;
    H = *cfg.H;
  } else {
    const auto d = ramare_defaults(spec, X, cfg.eps, cfg.eps0, *primes);
    P = d.P;
    Q = d.Q;
    H = d.H;
    restriction = d.restriction;
  }
  const auto dec = ramare_decompose(spec, X, P, Q, H, cfg.t_points, *primes, restriction, ctx.threads);
  Table pieces{{"t", "piece", "re", "im"}, {}};
  for (std::size_t i = 0; i < dec.t.size(); ++i) {
    pieces.add({dec.t[i], std::string("lhs"), dec.lhs[i].real(), dec.lhs[i].imag()});
    for (int b = 0; b < 5; ++b) {
      pieces.add({dec.t[i], "B" + std::to_string(b + 1), dec.B[i][b].real(), dec.B[i][b].imag()});
    }
    pieces.add({dec.t[i], std::string("residual"), dec.residual[i], 0.0});
    r.checks.push_back(identity_row("decomposition_t" + format_double(dec.t[i]), dec.residual[i] <= dec.tolerance,
                                    dec.residual[i], dec.tolerance, "residual against 1e-9 (1 + sum |a_n|/n)"));
  }
  r.tables["pieces"] = std::move(pieces);
  r.summary["P"] = P;
  r.summary["Q"] = Q;
  r.summary["H"] = H;
  r.summary["restricted"] = !manual;
  r.summary["l1"] = dec.l1;
  r.summary["tolerance"] = dec.tolerance;
  r.summary["max_residual"] = dec.max_residual();
  r.summary["hypothesis_violations"] = dec.hypothesis_violations;
  r.summary["bins"] = dec.bins;

  // Grid split of [T0, T] into points where the [P1,Q1] block sums are all
  // small, else the [P2,Q2] ones, else neither.
  double sigma = 0.25;
  try {
    sigma = rho_sigma(cfg.k, cfg.alpha).sigma;
  } catch (const DomainError&) {
  }
  const double T0 = std::pow(std::log(static_cast<double>(X)), sigma / 3.0);
  const double Hs = std::max(1.0, std::pow(rp.P1(), 1.0 / 6.0));
  std::vector<double> grid;
  if (cfg.T > T0) {
    const double step = cfg.points > 1 ? (cfg.T - T0) / static_cast<double>(cfg.points - 1) : 0.0;
    for (std::uint64_t j = 0; j < cfg.points; ++j) grid.push_back(T0 + static_cast<double>(j) * step);
  }
  const auto t0 = detail::resolve_t0(ctx, spec, X, *primes);
  const auto split = split_classification(spec, rp, Hs, t0.t0, grid, *primes, ctx.threads);
  Table st{{"t", "class", "worst_ratio_1", "worst_ratio_2"}, {}};
  std::uint64_t counts[3] = {0, 0, 0};
  for (const auto& s : split) {
    st.add({s.t, std::string(s.cls == 1 ? "T1" : s.cls == 2 ? "T2" : "U"), s.worst1, s.worst2});
    ++counts[s.cls];
  }
  r.tables["split"] = std::move(st);
  r.summary["split"] = {{"T0", T0}, {"T", cfg.T}, {"H", Hs}, {"t0", t0.t0}, {"T1", counts[1]}, {"T2", counts[2]},
                        {"U", counts[0]}, {"note", "diagnostic grid classification, not a bound"}};
  r.summary["X"] = X;
  r.summary["spec"] = spec.name;
  return r;
}

// ------------------------------------------------------------------- run

inline ExperimentResult dispatch(RunContext& ctx) {
  switch (ctx.cfg.experiment) {
    case ExperimentKind::sieve: return run_sieve(ctx);
    case ExperimentKind::scan: return run_scan(ctx, false);
    case ExperimentKind::exceptional: return run_scan(ctx, true);
    case ExperimentKind::variance: return run_variance(ctx);
    case ExperimentKind::asymptotics: return run_asymptotics(ctx);
    case ExperimentKind::halasz: return run_halasz(ctx);
    case ExperimentKind::dirichlet: return run_dirichlet(ctx);
    case ExperimentKind::ramare: return run_ramare(ctx);
    case ExperimentKind::threshold: return run_threshold(ctx);
  }
  throw UsageError("unknown experiment");
}

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitUsage = 2, kExitVerification = 3 };

struct RunOutcome {
  int exit_code = kExitOk;
  std::string error;
  json manifest;
  std::vector<std::filesystem::path> result_files;  // excludes the manifest
};

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string config_hash(const ExperimentConfig& cfg) {
  const std::string s = canonical_config(cfg).dump();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(s.data(), s.size())));
  return buf;
}

/// Writes <experiment>.json, one CSV per table, and manifest.json to out_dir.
/// Result files hold no timestamps, thread counts or paths.
inline std::vector<std::filesystem::path> emit_results(const ExperimentConfig& cfg, const ExperimentResult& res) {
  namespace fs = std::filesystem;
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  std::vector<fs::path> files;
  json tables = json::object();
  for (const auto& [name, table] : res.tables) {
    const std::string file = res.experiment + "_" + name + ".csv";
    write_csv(dir / file, table);
    files.push_back(dir / file);
    tables[name] = file;
  }
  json checks = json::array();
  for (const auto& c : res.checks) checks.push_back(to_json(c));
  json doc;
  doc["experiment"] = res.experiment;
  doc["version"] = SHORTINT_VERSION;
  doc["config_hash"] = config_hash(cfg);
  doc["config"] = canonical_config(cfg);
  doc["summary"] = res.summary;
  doc["checks"] = checks;
  doc["tables"] = tables;
  write_json(dir / (res.experiment + ".json"), doc);
  files.insert(files.begin(), dir / (res.experiment + ".json"));
  return files;
}

/// Runs one experiment end to end. Never throws for experiment failures: the
/// outcome carries the exit code and the manifest is always written when the
/// output directory is usable.
inline RunOutcome run(const ExperimentConfig& cfg, bool strict) {
  RunOutcome out;
  const std::string started = utc_now();
  RunContext ctx(cfg, strict);
  std::optional<ExperimentResult> res;
  try {
    res = dispatch(ctx);
    out.result_files = emit_results(cfg, *res);
    if (res->hard_failure()) {
      out.exit_code = kExitVerification;
      out.error = "one or more checks failed";
    }
  } catch (const IdentityViolation& e) {
    out.exit_code = kExitVerification;
    out.error = std::string("identity violation: ") + e.what();
  } catch (const InvariantError& e) {
    out.exit_code = kExitVerification;
    out.error = std::string("invariant violation: ") + e.what();
  } catch (const UsageError& e) {
    out.exit_code = kExitUsage;
    out.error = e.what();
  } catch (const ParameterError& e) {
    out.exit_code = kExitUsage;
    out.error = std::string("parameter error: ") + e.what();
  } catch (const std::exception& e) {
    out.exit_code = kExitRuntime;
    out.error = e.what();
  }

  json m;
  m["artifact"] = "shortint";
  m["version"] = SHORTINT_VERSION;
  m["experiment"] = to_string(cfg.experiment);
  m["config_hash"] = config_hash(cfg);
  m["started"] = started;
  m["finished"] = utc_now();
  m["threads"] = cfg.threads;
  m["strict"] = strict;
  m["cache"] = {{"dir", cfg.cache_dir},
                {"hits", ctx.cache ? ctx.cache->hits() : 0},
                {"misses", ctx.cache ? ctx.cache->misses() : 0}};
  json statuses = json::array();
  std::uint64_t n[3] = {0, 0, 0};
  if (res) {
    for (const auto& c : res->checks) {
      statuses.push_back({{"id", c.id}, {"kind", to_string(c.kind)}, {"status", to_string(c.status)}});
      ++n[static_cast<int>(c.status)];
    }
  }
  m["checks"] = statuses;
  m["counts"] = {{"pass", n[0]}, {"recorded", n[1]}, {"fail", n[2]}};
  json files = json::array();
  for (const auto& f : out.result_files) files.push_back(f.filename().string());
  m["files"] = files;
  m["exit_code"] = out.exit_code;
  m["error"] = out.error;
  out.manifest = m;
  try {
    std::filesystem::create_directories(cfg.out_dir);
    write_json(std::filesystem::path(cfg.out_dir) / "manifest.json", m);
  } catch (const std::exception& e) {
    if (out.exit_code == kExitOk) {
      out.exit_code = kExitRuntime;
      out.error = std::string("cannot write manifest: ") + e.what();
    }
  }
  return out;
}

}  // namespace shortint
