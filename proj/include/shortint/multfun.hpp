#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "shortint/error.hpp"
#include "shortint/numeric.hpp"
#include "shortint/parallel.hpp"
#include "shortint/primes.hpp"
#include "shortint/sieve.hpp"
#include "shortint/zeta.hpp"

namespace shortint {

/// For p beyond some cutoff the local factor of F(s) equals (1 - p^{i tau - s})^{-c}
/// exactly (exact = true) or up to O(k^2/p^2) terms (exact = false). This is what
/// lets F(s) be evaluated as zeta(s - i tau)^c times a finite product.
struct PrimeTailModel {
  unsigned c = 1;
  double tau = 0.0;
  std::uint64_t from = 2;
  bool exact = true;
};

/// A multiplicative function given by its values on prime powers.
struct MultiplicativeFunctionSpec {
  std::string name;
  unsigned bound_k = 1;
  bool real_flag = false;
  std::function<cplx(std::uint64_t, unsigned)> rule;
  /// Set when every value is an integer and no twist is present.
  std::function<std::int64_t(std::uint64_t, unsigned)> integer_rule;
  std::optional<PrimeTailModel> tail;

  cplx at(std::uint64_t p, unsigned a) const {
    const cplx v = rule(p, a);
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw EvaluationError("rule value is not finite for " + name + " at p=" + std::to_string(p) +
                            " a=" + std::to_string(a));
    }
    return v;
  }
  bool integer_valued() const { return static_cast<bool>(integer_rule); }
};

using SpecPtr = std::shared_ptr<const MultiplicativeFunctionSpec>;

/// f(n) as the product of rule values over the factorization.
inline cplx eval(const MultiplicativeFunctionSpec& spec, const FactorVector& fv) {
  cplx v = 1.0;
  for (const auto& e : fv) v *= spec.at(e.prime, e.exponent);
  return v;
}

// ---------------------------------------------------------------- built-ins

inline MultiplicativeFunctionSpec dk_spec(unsigned k) {
  if (k == 0) throw ParameterError("dk requires k >= 1");
  MultiplicativeFunctionSpec s;
  s.name = "dk:" + std::to_string(k);
  s.bound_k = k;
  s.real_flag = true;
  s.integer_rule = [k](std::uint64_t, unsigned a) { return static_cast<std::int64_t>(dk_prime_power(a, k)); };
  s.rule = [k](std::uint64_t, unsigned a) { return cplx(static_cast<double>(dk_prime_power(a, k)), 0.0); };
  s.tail = PrimeTailModel{k, 0.0, 2, true};
  return s;
}

/// f(n) = d_k(n) n^{i t1}.
inline MultiplicativeFunctionSpec dk_twist_spec(unsigned k, double t1) {
  if (k == 0) throw ParameterError("dk_twist requires k >= 1");
  MultiplicativeFunctionSpec s;
  std::ostringstream nm;
  nm << "dk_twist:" << k << ":" << t1;
  s.name = nm.str();
  s.bound_k = k;
  s.real_flag = (t1 == 0.0);
  s.rule = [k, t1](std::uint64_t p, unsigned a) {
    const double mag = static_cast<double>(dk_prime_power(a, k));
    return mag * unit_phase(-t1, a * std::log(static_cast<double>(p)));
  };
  if (t1 == 0.0) s.integer_rule = [k](std::uint64_t, unsigned a) { return static_cast<std::int64_t>(dk_prime_power(a, k)); };
  s.tail = PrimeTailModel{k, t1, 2, true};
  return s;
}

/// f(p^a) = k^a, i.e. f(n) = k^{Omega(n)}. Declared d_k-bounded although it is
/// not at prime powers with a >= 2 once k >= 2; the audit reports that.
inline MultiplicativeFunctionSpec omega_pow_spec(unsigned k) {
  if (k == 0) throw ParameterError("omega_pow requires k >= 1");
  MultiplicativeFunctionSpec s;
  s.name = "omega_pow:" + std::to_string(k);
  s.bound_k = k;
  s.real_flag = true;
  s.integer_rule = [k](std::uint64_t, unsigned a) {
    std::uint64_t v = 1;
    for (unsigned i = 0; i < a; ++i) v = checked_mul(v, k);
    return static_cast<std::int64_t>(v);
  };
  s.rule = [k](std::uint64_t, unsigned a) { return cplx(std::pow(static_cast<double>(k), a), 0.0); };
  s.tail = PrimeTailModel{k, 0.0, std::uint64_t{2} * k + 1, k == 1};
  return s;
}

/// d_k with every power of a prime in [P, Q] sent to 0.
inline MultiplicativeFunctionSpec rough_spec(unsigned k, std::uint64_t P, std::uint64_t Q) {
  if (k == 0) throw ParameterError("rough requires k >= 1");
  MultiplicativeFunctionSpec s;
  s.name = "rough:" + std::to_string(k) + ":" + std::to_string(P) + ":" + std::to_string(Q);
  s.bound_k = k;
  s.real_flag = true;
  s.integer_rule = [k, P, Q](std::uint64_t p, unsigned a) -> std::int64_t {
    if (p >= P && p <= Q) return 0;
    return static_cast<std::int64_t>(dk_prime_power(a, k));
  };
  s.rule = [k, P, Q](std::uint64_t p, unsigned a) {
    if (p >= P && p <= Q) return cplx(0.0);
    return cplx(static_cast<double>(dk_prime_power(a, k)), 0.0);
  };
  s.tail = PrimeTailModel{k, 0.0, std::max<std::uint64_t>(2, Q + 1), true};
  return s;
}

// ------------------------------------------------------------- custom rules

/// Text rule format, one directive per line, '#' starts a comment:
///   bound K          declared divisor bound (default 1)
///   real true|false  declared almost-real flag (default false)
///   name LABEL
///   COND A RE IM     rule line; the first matching line wins
/// COND is one of  *  N  <N  <=N  >N  >=N  N..M  mod:Q:R ; A is an exponent
/// or '*'. Prime powers matched by no line evaluate to 0.
inline MultiplicativeFunctionSpec parse_custom_rules(const std::string& text) {
  struct Line {
    int op;  // 0 any, 1 eq, 2 lt, 3 le, 4 gt, 5 ge, 6 range, 7 mod
    std::uint64_t x = 0, y = 0;
    int exponent = -1;
    cplx value;
  };
  auto parse_u64 = [](std::string_view s, int lineno) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw FormatError("custom rule line " + std::to_string(lineno) + ": bad integer '" + std::string(s) + "'");
    }
    return v;
  };
  auto parse_double = [](const std::string& s, int lineno) {
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw FormatError("custom rule line " + std::to_string(lineno) + ": bad number '" + s + "'");
    }
  };

  MultiplicativeFunctionSpec spec;
  spec.name = "custom";
  std::vector<Line> lines;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto h = raw.find('#'); h != std::string::npos) raw.resize(h);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok[0] == "bound") {
      if (tok.size() != 2) throw FormatError("custom rule line " + std::to_string(lineno) + ": bound K");
      spec.bound_k = static_cast<unsigned>(parse_u64(tok[1], lineno));
      if (spec.bound_k == 0) throw FormatError("custom rule bound must be >= 1");
      continue;
    }
    if (tok[0] == "real") {
      if (tok.size() != 2 || (tok[1] != "true" && tok[1] != "false")) {
        throw FormatError("custom rule line " + std::to_string(lineno) + ": real true|false");
      }
      spec.real_flag = tok[1] == "true";
      continue;
    }
    if (tok[0] == "name") {
      if (tok.size() != 2) throw FormatError("custom rule line " + std::to_string(lineno) + ": name LABEL");
      spec.name = tok[1];
      continue;
    }
    if (tok.size() != 4) {
      throw FormatError("custom rule line " + std::to_string(lineno) + ": expected 'cond a re im'");
    }
    Line L;
    std::string_view c = tok[0];
    if (c == "*") {
      L.op = 0;
    } else if (c.starts_with("mod:")) {
      auto rest = c.substr(4);
      auto colon = rest.find(':');
      if (colon == std::string_view::npos) throw FormatError("custom rule: mod:Q:R");
      L.op = 7;
      L.x = parse_u64(rest.substr(0, colon), lineno);
      L.y = parse_u64(rest.substr(colon + 1), lineno);
      if (L.x == 0) throw FormatError("custom rule: modulus must be positive");
    } else if (c.starts_with("<=")) {
      L.op = 3, L.x = parse_u64(c.substr(2), lineno);
    } else if (c.starts_with(">=")) {
      L.op = 5, L.x = parse_u64(c.substr(2), lineno);
    } else if (c.starts_with("<")) {
      L.op = 2, L.x = parse_u64(c.substr(1), lineno);
    } else if (c.starts_with(">")) {
      L.op = 4, L.x = parse_u64(c.substr(1), lineno);
    } else if (auto dots = c.find(".."); dots != std::string_view::npos) {
      L.op = 6, L.x = parse_u64(c.substr(0, dots), lineno), L.y = parse_u64(c.substr(dots + 2), lineno);
    } else {
      L.op = 1, L.x = parse_u64(c, lineno);
    }
    L.exponent = tok[1] == "*" ? -1 : static_cast<int>(parse_u64(tok[1], lineno));
    L.value = {parse_double(tok[2], lineno), parse_double(tok[3], lineno)};
    lines.push_back(L);
  }
  auto table = std::make_shared<const std::vector<Line>>(std::move(lines));
  spec.rule = [table](std::uint64_t p, unsigned a) -> cplx {
    for (const auto& L : *table) {
      if (L.exponent >= 0 && static_cast<unsigned>(L.exponent) != a) continue;
      bool ok = false;
      switch (L.op) {
        case 0: ok = true; break;
        case 1: ok = p == L.x; break;
        case 2: ok = p < L.x; break;
        case 3: ok = p <= L.x; break;
        case 4: ok = p > L.x; break;
        case 5: ok = p >= L.x; break;
        case 6: ok = p >= L.x && p <= L.y; break;
        case 7: ok = p % L.x == L.y; break;
      }
      if (ok) return L.value;
    }
    return 0.0;
  };
  return spec;
}

inline MultiplicativeFunctionSpec load_custom_rules(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open custom rule file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_custom_rules(ss.str());
}

/// Registry lookup: dk:K, dk_twist:K:T, omega_pow:K, rough:K:P:Q, one,
/// custom:PATH.
inline MultiplicativeFunctionSpec spec_from_name(const std::string& name) {
  std::vector<std::string> parts;
  if (name.starts_with("custom:")) return load_custom_rules(name.substr(7));
  std::string cur;
  for (char ch : name) {
    if (ch == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(cur);
  auto num = [&](std::size_t i) -> std::uint64_t {
    std::uint64_t v = 0;
    const auto& s = parts.at(i);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ParameterError("bad integer in spec name " + name);
    return v;
  };
  try {
    if (parts[0] == "one" && parts.size() == 1) {
      auto s = dk_spec(1);
      s.name = "one";
      return s;
    }
    if (parts[0] == "dk" && parts.size() == 2) return dk_spec(static_cast<unsigned>(num(1)));
    if (parts[0] == "omega_pow" && parts.size() == 2) return omega_pow_spec(static_cast<unsigned>(num(1)));
    if (parts[0] == "rough" && parts.size() == 4) return rough_spec(static_cast<unsigned>(num(1)), num(2), num(3));
    if (parts[0] == "dk_twist" && parts.size() == 3) {
      return dk_twist_spec(static_cast<unsigned>(num(1)), std::stod(parts[2]));
    }
  } catch (const std::invalid_argument&) {
    throw ParameterError("bad number in spec name " + name);
  }
  throw ParameterError("unknown multiplicative function spec '" + name + "'");
}

// ------------------------------------------------------------------ audits

struct DkBoundReport {
  std::uint64_t checked = 0;
  std::vector<std::uint64_t> violations;
};

/// Lists n in [lo, hi) with |f(n)| > d_k(n) (1 + 1e-12).
inline DkBoundReport check_dk_bounded(const MultiplicativeFunctionSpec& spec, std::uint64_t lo,
                                      std::uint64_t hi, const PrimeTable& primes) {
  DkBoundReport rep;
  const unsigned k = spec.bound_k;
  const std::uint64_t seg_len = SieveConfig{}.segment_size;
  for (std::uint64_t a = lo; a < hi; a += seg_len) {
    const std::uint64_t b = std::min(hi, a + seg_len);
    std::vector<double> absf(b - a, 1.0), dk(b - a, 1.0);
    sieve_prime_powers(a, b, primes, [&](std::size_t j, std::uint64_t p, std::uint32_t e) {
      absf[j] *= std::abs(spec.at(p, e));
      dk[j] *= static_cast<double>(dk_prime_power(e, k));
    });
    for (std::size_t j = 0; j < absf.size(); ++j) {
      if (absf[j] > dk[j] * (1.0 + 1e-12)) rep.violations.push_back(a + j);
    }
    rep.checked += b - a;
  }
  return rep;
}

/// Values at primes up to X, with the logarithms the distance kernels need.
struct PrimeSample {
  std::vector<std::uint32_t> primes;
  std::vector<double> log_p;
  std::vector<cplx> f_p;
};

inline PrimeSample prime_sample(const MultiplicativeFunctionSpec& spec, std::uint64_t X, const PrimeTable& table) {
  if (table.limit() < X) throw PreconditionError("prime table does not reach X");
  PrimeSample s;
  for (std::uint32_t p : table) {
    if (p > X) break;
    s.primes.push_back(p);
    s.log_p.push_back(std::log(static_cast<double>(p)));
    s.f_p.push_back(spec.at(p, 1));
  }
  return s;
}

/// P_f(x) = prod_{p <= x} (1 + (|f(p)| - 1)/p), accumulated as a sum of logs.
inline double mertens_product(const MultiplicativeFunctionSpec& spec, std::uint64_t x, const PrimeTable& table) {
  if (table.limit() < x) throw PreconditionError("prime table does not reach x");
  NeumaierSum logs;
  for (std::uint32_t p : table) {
    if (p > x) break;
    const double fp = std::abs(spec.at(p, 1));
    const double u = (fp - 1.0) / p;
    if (1.0 + u <= 0.0) throw DomainError("Mertens factor is not positive at p=" + std::to_string(p));
    logs += std::log1p(u);
  }
  return std::exp(logs.value());
}

inline double h_threshold_from(double PfX, double log_X, double eps, unsigned k) {
  if (log_X <= 1.0) throw DomainError("H(f,X,eps) requires X > e");
  if (k == 1) return 1.0 / PfX;
  return std::pow(PfX * log_X, (1.0 + eps) * std::log(static_cast<double>(k))) / PfX;
}

/// H(f, X, eps) = (P_f(X) log X)^{(1+eps) log k} / P_f(X).
inline double h_threshold(const MultiplicativeFunctionSpec& spec, std::uint64_t X, double eps,
                          const PrimeTable& table) {
  if (static_cast<double>(X) <= std::numbers::e) throw DomainError("H(f,X,eps) requires X > e");
  return h_threshold_from(mertens_product(spec, X, table), std::log(static_cast<double>(X)), eps, spec.bound_k);
}

struct NonvanishingAudit {
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_w = 0.0;
  double worst_z = 0.0;
  std::vector<double> margins;
};

/// For each (w, z): [sum_{w<p<=z} |f(p)|/p - k alpha sum_{w<p<=z} 1/p] log w.
inline NonvanishingAudit nonvanishing_audit(const MultiplicativeFunctionSpec& spec, double alpha, double Delta,
                                            const std::vector<std::pair<double, double>>& wz,
                                            const PrimeTable& table) {
  if (wz.empty()) throw ParameterError("nonvanishing audit needs a nonempty (w, z) grid");
  if (static_cast<double>(table.limit()) < Delta) throw PreconditionError("prime table does not reach Delta");
  // Prefix sums of (|f(p)| - k alpha)/p so that each pair costs two binary
  // searches, and an exact equality |f(p)| = k alpha gives an exact zero.
  const double ka = spec.bound_k * alpha;
  std::vector<double> cut{0.0};
  std::vector<double> pf{0.0};
  NeumaierSum sf;
  for (std::uint32_t p : table) {
    if (p > Delta) break;
    sf += (std::abs(spec.at(p, 1)) - ka) / p;
    cut.push_back(p);
    pf.push_back(sf.value());
  }
  auto idx = [&](double x) {  // number of primes <= x
    return static_cast<std::size_t>(std::upper_bound(cut.begin() + 1, cut.end(), x) - cut.begin() - 1);
  };
  NonvanishingAudit out;
  for (auto [w, z] : wz) {
    if (!(2.0 <= w && w <= z && z <= Delta)) throw ParameterError("nonvanishing audit needs 2 <= w <= z <= Delta");
    const std::size_t iw = idx(w), iz = idx(z);
    const double m = (pf[iz] - pf[iw]) * std::log(w);
    out.margins.push_back(m);
    if (m < out.worst_margin) out.worst_margin = m, out.worst_w = w, out.worst_z = z;
  }
  return out;
}

// --------------------------------------------------------- Halasz distance

/// D(f, n^{it}; X)^2 = sum_{p <= X} (|f(p)| - Re f(p) p^{-it}) / p.
inline double halasz_distance_sq(const PrimeSample& s, double t) {
  NeumaierSum acc;
  for (std::size_t i = 0; i < s.primes.size(); ++i) {
    const double term = std::abs(s.f_p[i]) - (s.f_p[i] * unit_phase(t, s.log_p[i])).real();
    acc += std::max(0.0, term) / s.primes[i];
  }
  return acc.value();
}

inline double halasz_distance_sq(const MultiplicativeFunctionSpec& spec, double t, std::uint64_t X,
                                 const PrimeTable& table) {
  return halasz_distance_sq(prime_sample(spec, X, table), t);
}

/// D^2 on the uniform grid t_lo + j*step, j < count. Phases are rotated one
/// step at a time and re-seeded from direct evaluation every 1024 steps.
/// Blocks of 1024 grid points are independent, so the result does not depend
/// on the thread count.
inline std::vector<double> halasz_grid(const PrimeSample& s, double t_lo, double step, std::size_t count,
                                       Threads threads = {}) {
  constexpr std::size_t kBlock = 1024;
  const std::size_t np = s.primes.size();
  std::vector<double> wr(np), wi(np);
  NeumaierSum total_abs;
  for (std::size_t i = 0; i < np; ++i) {
    wr[i] = s.f_p[i].real() / s.primes[i];
    wi[i] = s.f_p[i].imag() / s.primes[i];
    total_abs += std::abs(s.f_p[i]) / s.primes[i];
  }
  const double A = total_abs.value();
  std::vector<double> rot_r(np), rot_i(np);
  for (std::size_t i = 0; i < np; ++i) {
    const cplx r = unit_phase(step, s.log_p[i]);
    rot_r[i] = r.real();
    rot_i[i] = r.imag();
  }
  std::vector<double> out(count);
  const std::size_t nblocks = (count + kBlock - 1) / kBlock;
  parallel_chunks(nblocks, threads, [&](std::size_t b) {
    const std::size_t j0 = b * kBlock, j1 = std::min(count, j0 + kBlock);
    std::vector<double> pr(np), pi(np);
    const double t0 = t_lo + static_cast<double>(j0) * step;
    for (std::size_t i = 0; i < np; ++i) {
      const cplx ph = unit_phase(t0, s.log_p[i]);
      pr[i] = ph.real();
      pi[i] = ph.imag();
    }
    for (std::size_t j = j0; j < j1; ++j) {
      double acc[4] = {0, 0, 0, 0};
      std::size_t i = 0;
      for (; i + 4 <= np; i += 4) {
        for (std::size_t l = 0; l < 4; ++l) {
          const std::size_t q = i + l;
          acc[l] += wr[q] * pr[q] - wi[q] * pi[q];
          const double nr = pr[q] * rot_r[q] - pi[q] * rot_i[q];
          const double ni = pr[q] * rot_i[q] + pi[q] * rot_r[q];
          pr[q] = nr;
          pi[q] = ni;
        }
      }
      for (; i < np; ++i) {
        acc[0] += wr[i] * pr[i] - wi[i] * pi[i];
        const double nr = pr[i] * rot_r[i] - pi[i] * rot_i[i];
        const double ni = pr[i] * rot_i[i] + pi[i] * rot_r[i];
        pr[i] = nr;
        pi[i] = ni;
      }
      const double re = (acc[0] + acc[1]) + (acc[2] + acc[3]);
      out[j] = std::max(0.0, A - re);
    }
  });
  return out;
}

struct T0Options {
  std::optional<double> window_lo;
  std::optional<double> window_hi;
  std::optional<double> coarse_step;
  unsigned refine_rounds = 3;
  double real_threshold = 1e-6;
  Threads threads{};
};

struct DistanceProfile {
  double X = 0.0;
  std::vector<double> t_grid;
  std::vector<double> d2_values;
  double t0 = 0.0;
  double d2_at_t0 = 0.0;
  double final_step = 0.0;
  bool boundary = false;
  std::string reason;  // "declared_real", "almost_real", "scan"
  double nonreal_mass = 0.0;
  std::vector<double> ties;
};

/// sum_{p <= X, f(p) not real} |f(p)| / p.
inline double nonreal_prime_mass(const PrimeSample& s) {
  NeumaierSum acc;
  for (std::size_t i = 0; i < s.primes.size(); ++i) {
    const cplx v = s.f_p[i];
    if (std::abs(v.imag()) > 1e-15 * std::abs(v)) acc += std::abs(v) / s.primes[i];
  }
  return acc.value();
}

inline DistanceProfile find_t0(const MultiplicativeFunctionSpec& spec, std::uint64_t X, const PrimeTable& table,
                               const T0Options& opt = {}) {
  const double Xd = static_cast<double>(X);
  const double L = std::log(Xd);
  DistanceProfile prof;
  prof.X = Xd;
  const double lo = opt.window_lo.value_or(std::max(-Xd, -L * L * L));
  const double hi = opt.window_hi.value_or(std::min(Xd, L * L * L));
  if (!(lo <= hi)) throw ParameterError("t0 search window is empty");
  if (lo < -Xd || hi > Xd) throw ParameterError("t0 search window must lie inside [-X, X]");
  const PrimeSample s = prime_sample(spec, X, table);
  prof.nonreal_mass = nonreal_prime_mass(s);
  if (spec.real_flag || prof.nonreal_mass <= opt.real_threshold) {
    prof.reason = spec.real_flag ? "declared_real" : "almost_real";
    prof.t0 = 0.0;
    prof.d2_at_t0 = halasz_distance_sq(s, 0.0);
    return prof;
  }
  prof.reason = "scan";
  const double step = opt.coarse_step.value_or(1.0 / (2.0 * L));
  if (!(step > 0)) throw ParameterError("coarse step must be positive");
  const std::size_t count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  prof.t_grid.resize(count);
  for (std::size_t j = 0; j < count; ++j) prof.t_grid[j] = lo + static_cast<double>(j) * step;
  prof.d2_values = halasz_grid(s, lo, step, count, opt.threads);

  std::size_t best = 0;
  for (std::size_t j = 1; j < count; ++j) {
    if (prof.d2_values[j] < prof.d2_values[best]) best = j;
  }
  const double vmin = prof.d2_values[best];
  for (std::size_t j = 0; j < count; ++j) {
    if (j != best && std::abs(prof.d2_values[j] - vmin) <= 1e-12 * std::max(1.0, vmin)) {
      prof.ties.push_back(prof.t_grid[j]);
    }
  }
  double t_best = prof.t_grid[best];
  double v_best = halasz_distance_sq(s, t_best);
  double h = step;
  for (unsigned r = 0; r < opt.refine_rounds; ++r) {
    const double centre = t_best;
    const double fine = h / 10.0;
    for (int j = -10; j <= 10; ++j) {
      const double t = std::clamp(centre + j * fine, lo, hi);
      const double v = halasz_distance_sq(s, t);
      if (v < v_best || (v == v_best && t < t_best)) v_best = v, t_best = t;
    }
    h = fine;
  }
  prof.t0 = t_best;
  prof.d2_at_t0 = v_best;
  prof.final_step = h;
  prof.boundary = (t_best <= lo + 0.5 * h) || (t_best >= hi - 0.5 * h);
  return prof;
}

/// D^2(t) - rho * min(log log X, 3 log(|t - t0| log X + 1)) for each t.
inline std::vector<double> distance_lowerbound_profile(const PrimeSample& s, double X, double t0,
                                                       const std::vector<double>& t_grid, double rho) {
  const double L = std::log(X);
  std::vector<double> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) {
    const double cap = std::min(std::log(L), 3.0 * std::log(std::abs(t - t0) * L + 1.0));
    out.push_back(halasz_distance_sq(s, t) - rho * cap);
  }
  return out;
}

// ------------------------------------------------ Euler product diagnostics

/// Local factor sum_{a >= 0} f(p^a) p^{-a s}. Summation stops once the terms
/// are negligible and, when |f| <= d_k holds, the d_k majorant of the rest is.
inline cplx local_factor(const MultiplicativeFunctionSpec& spec, std::uint64_t p, cplx s) {
  const double lp = std::log(static_cast<double>(p));
  const cplx step = std::exp(-s * lp);
  const double ratio = std::abs(step);
  const double k = std::max(1u, spec.bound_k);
  cplx acc = 1.0, pw = 1.0;
  double dk = 1.0, majorant = 1.0, prev = 1.0;
  for (unsigned a = 1; a < 20000; ++a) {
    pw *= step;
    const cplx term = spec.at(p, a) * pw;
    acc += term;
    dk *= (a + k - 1.0) / a;
    majorant *= ratio;
    const double q = (a + k) / (a + 1.0) * ratio;  // ratio of successive majorant terms
    const double size = std::abs(term);
    const double tol = 1e-17 * std::abs(acc);
    if (size < tol && prev < tol * 4 && q < 1.0 && dk * majorant * q / (1.0 - q) < tol) break;
    prev = size;
  }
  return acc;
}

/// F(s; X) = prod_{p <= X} local factor.
inline cplx euler_product_truncated(const MultiplicativeFunctionSpec& spec, std::uint64_t X, cplx s,
                                    const PrimeTable& table) {
  cplx logsum = 0.0;
  ComplexNeumaierSum acc;
  for (std::uint32_t p : table) {
    if (p > X) break;
    acc += std::log(local_factor(spec, p, s));
  }
  logsum = acc.value();
  return std::exp(logsum);
}

struct FullSeries {
  cplx value;
  double tail_relative;  // bound on the relative error from the tail model
};

/// F(s) for Re s > 1 via zeta(s - i tau)^c * prod_{p <= Y} local(p,s) (1 - p^{i tau - s})^c.
inline FullSeries dirichlet_series_full(const MultiplicativeFunctionSpec& spec, cplx s, const PrimeTable& table) {
  if (!spec.tail) throw AccuracyError("spec " + spec.name + " has no prime tail model; F(s) cannot be bounded");
  const PrimeTailModel& m = *spec.tail;
  const std::uint64_t Y = std::max<std::uint64_t>(table.limit(), m.from);
  if (table.limit() < m.from) throw PreconditionError("prime table shorter than the tail model cutoff");
  const cplx shift(0.0, m.tau);
  ComplexNeumaierSum acc;
  for (std::uint32_t p : table) {
    const double lp = std::log(static_cast<double>(p));
    const cplx corr = std::log(1.0 - std::exp((shift - s) * lp)) * static_cast<double>(m.c);
    acc += std::log(local_factor(spec, p, s)) + corr;
  }
  const cplx z = zeta(s - shift);
  const cplx value = std::exp(acc.value() + static_cast<double>(m.c) * std::log(z));
  double tail = 0.0;
  if (!m.exact) {
    const double sigma = s.real();
    const double k = std::max<double>(spec.bound_k, m.c);
    // Per prime p > Y the log-ratio is at most 4 k^2 / p^{2 sigma}; sum over n > Y.
    const double bound = 4.0 * k * k / ((2.0 * sigma - 1.0) * std::pow(static_cast<double>(Y), 2.0 * sigma - 1.0));
    tail = std::expm1(bound);
  }
  return {value, tail};
}

struct EulerDiagnostics {
  double ratio_34 = 0.0;
  double ratio_35 = 0.0;
  double F_trunc_abs = 0.0;
  double F_shift_abs = 0.0;
  double F_gamma_abs = 0.0;
  double tail_relative = 0.0;
  double PfX = 0.0;
};

/// ratio_34 = |F(1+it; X)| / |F(1 + 1/log X + it)|;
/// ratio_35 = |F(1 + 1/log X + gamma + it)| (gamma log X)^alpha / (P_f(X) log X).
inline EulerDiagnostics euler_product_diagnostics(const MultiplicativeFunctionSpec& spec, double t, double gamma,
                                                  std::uint64_t X, double alpha, const PrimeTable& table) {
  const double L = std::log(static_cast<double>(X));
  if (!(gamma > 1.0 / L)) throw ParameterError("gamma must exceed 1/log X");
  EulerDiagnostics d;
  d.PfX = mertens_product(spec, X, table);
  d.F_trunc_abs = std::abs(euler_product_truncated(spec, X, cplx(1.0, t), table));
  const auto shifted = dirichlet_series_full(spec, cplx(1.0 + 1.0 / L, t), table);
  const auto far = dirichlet_series_full(spec, cplx(1.0 + 1.0 / L + gamma, t), table);
  d.tail_relative = std::max(shifted.tail_relative, far.tail_relative);
  if (d.tail_relative > 0.01) throw AccuracyError("Dirichlet series tail bound exceeds 1% of the value");
  d.F_shift_abs = std::abs(shifted.value);
  d.F_gamma_abs = std::abs(far.value);
  d.ratio_34 = d.F_trunc_abs / d.F_shift_abs;
  d.ratio_35 = d.F_gamma_abs * std::pow(gamma * L, alpha) / (d.PfX * L);
  return d;
}

}  // namespace shortint
