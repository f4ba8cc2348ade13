#include "sdepca/certificates.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

#include "sdepca/errors.hpp"

namespace sdepca {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLn2 = std::numbers::ln2;
const double kLn3 = std::log(3.0);

void require_p_K(double p, double K) {
  if (!(p >= 2.0) || !std::isfinite(p)) throw DomainError("moment order p must satisfy p >= 2");
  if (!(K >= 0.0) || !std::isfinite(K)) throw DomainError("Lipschitz constant K must be finite and nonnegative");
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : -kInf; }

// K * log-ish terms where K = 0 must give an exact log 0.
double log_power(double K, double exponent) { return K > 0.0 ? exponent * std::log(K) : -kInf; }

// (p(p-1)/2)^{p/2} added to base^{p/2}, in logs.
double log_half_power_sum(double log_base, double p) {
  return log_add_exp(0.5 * p * log_base, 0.5 * p * std::log(p * (p - 1.0) / 2.0));
}

struct NHat {
  double log_n = 0.0;
  double log_n_tau = 0.0;
};

// n_hat from the quotient q = c / (rate tau); `ceiling` picks ceil(q),
// otherwise floor(q) + 1. Always at least one block.
NHat block_count(double c, double rate, double log_tau, bool ceiling) {
  const double log_q = std::log(c) - std::log(rate) - log_tau;
  NHat out;
  if (log_q < 52.0 * kLn2) {
    const double q = std::exp(log_q);
    const double n = std::max(1.0, ceiling ? std::ceil(q) : std::floor(q) + 1.0);
    out.log_n = std::log(n);
  } else {
    out.log_n = log_q;
  }
  out.log_n_tau = out.log_n + log_tau;
  return out;
}

void require_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
}

void require_pair(const DecayPair& pair) {
  if (!(pair.rate > 0.0) || !std::isfinite(pair.rate)) throw DomainError("assumed decay rate must be positive");
  // E|x(0)|^p = |x0|^p forces M >= 1.
  if (!(pair.log_M >= 0.0) || !std::isfinite(pair.log_M)) throw DomainError("assumed envelope constant must be >= 1");
}

void require_log_step(double log_step, const char* name) {
  if (std::isnan(log_step) || log_step == kInf) {
    throw DomainError(std::string(name) + " must be a positive finite step");
  }
}

Certificate check_q1(const CertificateParams& in) {
  require_delta(in.delta);
  require_log_step(in.log_tau, "tau");
  const double p = in.p, K = in.K;
  const double tau = std::exp(in.log_tau);
  const double c = (p - 1.0) * kLn2 + in.assumed.log_M - std::log(in.delta);
  const double horizon = c / in.assumed.rate + tau;
  const double log_term = K > 0.0 ? (p - 1.0) * kLn2 + constants::log_C2(p, K, in.log_tau) +
                                        0.5 * p * in.log_tau + log_expm1(constants::C3(p, K) * horizon)
                                  : -kInf;
  Certificate cert;
  cert.kind = CertificateKind::Q1;
  cert.inputs = in;
  cert.lhs_log = log_add_exp(std::log(in.delta), log_term);
  cert.rhs_log = 0.0;
  cert.pass = cert.lhs_log < cert.rhs_log;
  const NHat n = block_count(c, in.assumed.rate, in.log_tau, true);
  cert.log_n_hat = n.log_n;
  cert.block_horizon = std::exp(n.log_n_tau);
  if (cert.pass) {
    const double gamma2 = -cert.lhs_log / cert.block_horizon;
    cert.implied = DecayPair{(gamma2 + constants::moment_growth_rate(p, K)) * cert.block_horizon, gamma2};
  }
  return cert;
}

Certificate check_q3(const CertificateParams& in) {
  require_delta(in.delta);
  require_log_step(in.log_tau, "tau");
  const double p = in.p, K = in.K;
  const double tau = std::exp(in.log_tau);
  const double c = (p - 1.0) * kLn2 + in.assumed.log_M - std::log(in.delta);
  const double horizon = 2.0 * (c / in.assumed.rate + tau);
  const double log_term =
      K > 0.0 ? (p - 1.0) * kLn2 + constants::log_H4(horizon, K, in.log_tau, p) + 0.5 * p * in.log_tau : -kInf;
  Certificate cert;
  cert.kind = CertificateKind::Q3;
  cert.inputs = in;
  cert.lhs_log = log_add_exp(std::log(in.delta), log_term);
  cert.rhs_log = 0.0;
  cert.pass = cert.lhs_log < cert.rhs_log;
  const NHat n = block_count(c, in.assumed.rate, in.log_tau, false);
  cert.log_n_hat = n.log_n;
  cert.block_horizon = std::exp(n.log_n_tau);
  if (cert.pass) {
    const double lambda1 = -cert.lhs_log / cert.block_horizon;
    cert.implied = DecayPair{constants::log_H3(cert.block_horizon, p, K) + lambda1 * cert.block_horizon, lambda1};
  }
  return cert;
}

// Shared by Q4 and its closed-form threshold.
struct Q4Setup {
  NHat n;
  double x = 0.0;           // lambda1 n_hat tau
  double log_coef = 0.0;    // log(3^{p-1} H8(2 n_hat tau))
};

Q4Setup q4_setup(const CertificateParams& in) {
  require_log_step(in.log_tau, "tau");
  const double p = in.p, K = in.K;
  const double c = 4.0 * ((p - 1.0) * kLn3 + in.assumed.log_M);
  Q4Setup s;
  s.n = block_count(c, in.assumed.rate, in.log_tau, false);
  const double n_tau = std::exp(s.n.log_n_tau);
  s.x = in.assumed.rate * n_tau;
  s.log_coef = (p - 1.0) * kLn3 + constants::log_H8(2.0 * n_tau, K, p);
  return s;
}

Certificate check_q4(const CertificateParams& in) {
  require_log_step(in.log_h, "h");
  const Q4Setup s = q4_setup(in);
  const double p = in.p;
  Certificate cert;
  cert.kind = CertificateKind::Q4;
  cert.inputs = in;
  cert.lhs_log = log_add_exp(s.log_coef + 0.5 * p * in.log_h, -0.75 * s.x);
  cert.rhs_log = -0.5 * s.x;
  cert.pass = cert.lhs_log < cert.rhs_log;
  cert.log_n_hat = s.n.log_n;
  cert.block_horizon = std::exp(s.n.log_n_tau);
  if (cert.pass) {
    const double rate = in.assumed.rate / 2.0;
    cert.implied = DecayPair{constants::log_H1(cert.block_horizon, p, in.K) + rate * cert.block_horizon, rate};
  }
  return cert;
}

struct Q2Setup {
  double T = 0.0;
  double x = 0.0;         // gamma2 T
  double log_coef = 0.0;  // log(2^{p-1} H9(2T))
};

Q2Setup q2_setup(const CertificateParams& in) {
  Q2Setup s;
  s.T = 1.0 + 4.0 * ((in.p - 1.0) * kLn2 + in.assumed.log_M) / in.assumed.rate;
  s.x = in.assumed.rate * s.T;
  s.log_coef = (in.p - 1.0) * kLn2 + constants::log_H9(2.0 * s.T, in.p, in.K);
  return s;
}

Certificate check_q2(const CertificateParams& in) {
  require_log_step(in.log_h, "h");
  const Q2Setup s = q2_setup(in);
  Certificate cert;
  cert.kind = CertificateKind::Q2;
  cert.inputs = in;
  cert.lhs_log = log_add_exp(s.log_coef + 0.5 * in.p * in.log_h, -0.75 * s.x);
  cert.rhs_log = -0.5 * s.x;
  cert.pass = cert.lhs_log < cert.rhs_log;
  cert.block_horizon = s.T;
  if (cert.pass) {
    const double rate = in.assumed.rate / 2.0;
    cert.implied = DecayPair{rate * s.T + constants::moment_growth_rate(in.p, in.K) * s.T, rate};
  }
  return cert;
}

// log h* solving coef h^{p/2} + e^{-3x/4} = e^{-x/2}.
double closed_form_log_step(double x, double log_coef, double p) {
  if (log_coef == -kInf) return kInf;
  return (2.0 / p) * (-0.5 * x + std::log(-std::expm1(-0.25 * x)) - log_coef);
}

double margin(CertificateKind kind, CertificateParams params, double log_value) {
  if (kind == CertificateKind::Q1 || kind == CertificateKind::Q3) {
    params.log_tau = log_value;
  } else {
    params.log_h = log_value;
  }
  const Certificate c = check_certificate(kind, params);
  return c.lhs_log - c.rhs_log;
}

std::string scan_table(const std::vector<double>& xs, const std::vector<double>& ys) {
  std::ostringstream os;
  os << "monotonicity scan failed; log_value, margin:\n";
  for (std::size_t i = 0; i < xs.size(); ++i) os << "  " << xs[i] << ", " << ys[i] << "\n";
  return os.str();
}

// Finds the crossing of a nondecreasing margin (negative = pass) in the log
// variable. Brackets by doubling steps away from 0, verifies monotonicity on
// a 65-point scan across the bracket, then bisects.
double bisect_log_threshold(const std::function<double(double)>& margin_at) {
  constexpr double kUpperCap = 1e4;
  constexpr int kMaxExpansions = 200;
  std::vector<double> xs, ys;
  auto eval = [&](double x) {
    const double m = margin_at(x);
    xs.push_back(x);
    ys.push_back(m);
    return m;
  };
  double lo, hi;
  if (eval(0.0) < 0.0) {
    lo = 0.0;
    double step = 1.0;
    hi = lo + step;
    while (eval(hi) < 0.0) {
      lo = hi;
      step *= 2.0;
      hi = lo + step;
      if (hi > kUpperCap) return kInf;
    }
  } else {
    hi = 0.0;
    double step = 1.0;
    lo = hi - step;
    int expansions = 0;
    while (eval(lo) >= 0.0) {
      hi = lo;
      step *= 2.0;
      lo = hi - step;
      if (++expansions > kMaxExpansions) throw MonotonicityError(scan_table(xs, ys) + "no passing value found");
    }
  }
  // Expansion points, sorted, must already be monotone; add a uniform scan.
  for (int i = 1; i < 64; ++i) eval(lo + (hi - lo) * i / 64.0);
  std::vector<std::size_t> order(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    const double prev = ys[order[i - 1]], cur = ys[order[i]];
    if (cur < prev - 1e-12 * std::max(1.0, std::fabs(prev))) {
      std::vector<double> sx, sy;
      for (auto k : order) {
        sx.push_back(xs[k]);
        sy.push_back(ys[k]);
      }
      throw MonotonicityError(scan_table(sx, sy));
    }
  }
  // Narrow the bracket with the scan before bisecting.
  for (auto k : order) {
    if (xs[k] >= lo && xs[k] <= hi) {
      if (ys[k] < 0.0) lo = std::max(lo, xs[k]);
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (xs[*it] >= lo && xs[*it] <= hi && ys[*it] >= 0.0) hi = std::min(hi, xs[*it]);
  }
  while (hi - lo > 1e-14 * std::max(1.0, std::fabs(lo))) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (margin_at(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

void fill_substeps(Threshold& t, double log_tau) {
  if (t.log_value == kInf) {
    t.min_substeps = 1;
    t.log_min_substeps = 0.0;
    return;
  }
  const double log_ratio = log_tau - t.log_value;
  if (log_ratio <= 0.0) {
    t.min_substeps = 1;
    t.log_min_substeps = 0.0;
    return;
  }
  if (log_ratio < 62.0 * kLn2) {
    auto m = static_cast<std::uint64_t>(std::ceil(std::exp(log_ratio)));
    while (log_tau - std::log(static_cast<double>(m)) > t.log_value) ++m;
    t.min_substeps = m;
    t.log_min_substeps = std::log(static_cast<double>(m));
  } else {
    t.log_min_substeps = log_ratio;
  }
}

void validate_common(const CertificateParams& params) {
  require_p_K(params.p, params.K);
  require_pair(params.assumed);
}

}  // namespace

std::string_view to_string(CertificateKind kind) {
  switch (kind) {
    case CertificateKind::Q1: return "Q1";
    case CertificateKind::Q2: return "Q2";
    case CertificateKind::Q3: return "Q3";
    case CertificateKind::Q4: return "Q4";
    case CertificateKind::LYAP: return "LYAP";
  }
  return "?";
}

CertificateKind parse_certificate_kind(std::string_view name) {
  if (name == "Q1") return CertificateKind::Q1;
  if (name == "Q2") return CertificateKind::Q2;
  if (name == "Q3") return CertificateKind::Q3;
  if (name == "Q4") return CertificateKind::Q4;
  if (name == "LYAP") return CertificateKind::LYAP;
  throw ValidationError("unknown certificate kind '" + std::string(name) + "'");
}

double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double hi = std::max(a, b), lo = std::min(a, b);
  if (hi == kInf) return kInf;
  return hi + std::log1p(std::exp(lo - hi));
}

double log_expm1(double x) {
  if (std::isnan(x)) return x;
  if (x <= 0.0) return x == 0.0 ? -kInf : std::nan("");
  if (x > 30.0) return x + std::log1p(-std::exp(-x));
  return std::log(std::expm1(x));
}

namespace constants {

double log_C1(double p, double K, double log_tau) {
  return (2.0 * p - 1.0) * kLn2 + log_power(K, p) + log_half_power_sum(log_tau, p);
}

double log_C2(double p, double K, double log_tau) {
  return (p - 1.0) * kLn2 + log_C1(p, K, log_tau) - std::log(p);
}

double C3(double p, double K) {
  const double two_pm1 = std::exp2(p - 1.0);
  return (4.0 * p - 1.0 + two_pm1 + 2.0 * (p - 1.0) * (2.0 * p - 1.0 + two_pm1) * K) * K;
}

double moment_growth_rate(double p, double K) { return 2.0 * p * K * (1.0 + (p - 1.0) * K); }

double log_H1(double T, double p, double K) { return moment_growth_rate(p, K) * T; }

double log_H3(double T, double p, double K) { return moment_growth_rate(p, K) * T; }

double log_H4(double T, double K, double log_tau, double p) {
  return log_C2(p, K, log_tau) + log_expm1(C3(p, K) * T);
}

double log_H6(double T, double p, double K) {
  return std::log1p(4.0 * (p - 1.0) * K) + 2.0 * p * kLn2 + log_power(K, p + 1.0) +
         K * T * (5.0 * p - 1.0 + 4.0 * (p - 1.0) * (2.0 * p - 1.0) * K) + safe_log(T);
}

double log_H7(double T, double K, double p) {
  return (2.0 * p - 1.0) * kLn2 + log_power(K, p) + log_half_power_sum(safe_log(T), p) +
         moment_growth_rate(p, K) * T;
}

double log_H8(double T, double K, double p) { return log_add_exp(log_H6(T, p, K), log_H7(T, K, p)); }

double log_H9(double T, double p, double K) {
  return std::log1p(4.0 * (p - 1.0) * K) + (2.0 * p + 1.0) * kLn2 + log_power(K, p + 1.0) +
         2.0 * K * T * (3.0 * p - 1.0 + (p - 1.0) * (5.0 * p - 4.0) * K) + safe_log(T);
}

}  // namespace constants

ConstantTable constant_table(double p, double K, double tau, double T) {
  require_p_K(p, K);
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("tau must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("horizon T must be positive");
  const double log_tau = std::log(tau);
  ConstantTable t;
  t.p = p;
  t.K = K;
  t.tau = tau;
  t.T = T;
  t.log_C1 = constants::log_C1(p, K, log_tau);
  t.log_C2 = constants::log_C2(p, K, log_tau);
  t.C3 = constants::C3(p, K);
  t.log_H1 = constants::log_H1(T, p, K);
  t.log_H3 = constants::log_H3(T, p, K);
  t.log_H4 = constants::log_H4(T, K, log_tau, p);
  t.log_H6 = constants::log_H6(T, p, K);
  t.log_H7 = constants::log_H7(T, K, p);
  t.log_H8 = constants::log_H8(T, K, p);
  t.log_H9 = constants::log_H9(T, p, K);
  return t;
}

Certificate check_certificate(CertificateKind kind, const CertificateParams& params) {
  validate_common(params);
  switch (kind) {
    case CertificateKind::Q1: return check_q1(params);
    case CertificateKind::Q2: return check_q2(params);
    case CertificateKind::Q3: return check_q3(params);
    case CertificateKind::Q4: return check_q4(params);
    case CertificateKind::LYAP: break;
  }
  throw ValidationError("LYAP certificates are produced by the Lyapunov margin check");
}

Threshold solve_threshold(CertificateKind kind, const CertificateParams& params) {
  validate_common(params);
  Threshold t;
  t.kind = kind;
  switch (kind) {
    case CertificateKind::Q1:
    case CertificateKind::Q3:
      require_delta(params.delta);
      t.log_value = bisect_log_threshold([&](double x) { return margin(kind, params, x); });
      return t;
    case CertificateKind::Q4: {
      const Q4Setup s = q4_setup(params);
      t.log_value = closed_form_log_step(s.x, s.log_coef, params.p);
      fill_substeps(t, params.log_tau);
      return t;
    }
    case CertificateKind::Q2: {
      const Q2Setup s = q2_setup(params);
      t.log_value = closed_form_log_step(s.x, s.log_coef, params.p);
      return t;
    }
    case CertificateKind::LYAP: break;
  }
  throw ValidationError("LYAP has no threshold");
}

Threshold solve_threshold_by_bisection(CertificateKind kind, const CertificateParams& params) {
  validate_common(params);
  if (kind == CertificateKind::LYAP) throw ValidationError("LYAP has no threshold");
  Threshold t;
  t.kind = kind;
  t.log_value = bisect_log_threshold([&](double x) { return margin(kind, params, x); });
  if (kind == CertificateKind::Q4) fill_substeps(t, params.log_tau);
  return t;
}

Certificate best_delta_certificate(CertificateKind kind, const CertificateParams& params,
                                   const std::vector<double>& deltas) {
  if (kind != CertificateKind::Q1 && kind != CertificateKind::Q3) {
    throw ValidationError("delta search applies to Q1 and Q3 only");
  }
  if (deltas.empty()) throw ValidationError("delta grid is empty");
  std::optional<Certificate> best;
  for (double delta : deltas) {
    CertificateParams p = params;
    p.delta = delta;
    Certificate c = check_certificate(kind, p);
    if (!best || c.lhs_log < best->lhs_log) best = std::move(c);
  }
  return *best;
}

ChainResult certify_chain(double p, double K, double delta, const DecayPair& sde_pair) {
  require_delta(delta);
  CertificateParams base;
  base.p = p;
  base.K = K;
  base.delta = delta;

  CertificateParams q2_in = base;
  q2_in.assumed = sde_pair;
  const double log_h2 = solve_threshold(CertificateKind::Q2, q2_in).log_value;
  // Any h below the Q2 bound gives the same EMSDE pair.
  q2_in.log_h = std::min(log_h2, 0.0) - kLn2;
  const Certificate q2_probe = check_certificate(CertificateKind::Q2, q2_in);
  if (!q2_probe.pass) throw NoCertificateError("Q2 fails below its own threshold");
  const DecayPair emsde_pair = *q2_probe.implied;

  CertificateParams q3_in = base;
  q3_in.assumed = emsde_pair;
  double log_tau = std::min(solve_threshold(CertificateKind::Q3, q3_in).log_value, 0.0) - kLn2;

  for (int attempt = 0; attempt < 200; ++attempt) {
    q3_in.log_tau = log_tau;
    const Certificate q3 = check_certificate(CertificateKind::Q3, q3_in);
    if (!q3.pass) throw NoCertificateError("Q3 fails below its own threshold");

    CertificateParams q4_in = base;
    q4_in.assumed = *q3.implied;
    q4_in.log_tau = log_tau;
    const double log_h4 = solve_threshold(CertificateKind::Q4, q4_in).log_value;
    // h = tau / m with m >= 2, and below both step-size bounds.
    double log_h = std::min({log_h2, log_h4, log_tau - kLn2}) - kLn2;
    const double log_m = log_tau - log_h;
    if (log_m < 52.0 * kLn2) {
      const double m = std::ceil(std::exp(log_m));
      log_h = log_tau - std::log(m);
    }
    q4_in.log_h = log_h;
    const Certificate q4 = check_certificate(CertificateKind::Q4, q4_in);

    CertificateParams q2_final = q2_in;
    q2_final.log_h = log_h;
    const Certificate q2 = check_certificate(CertificateKind::Q2, q2_final);

    if (q4.pass && q2.pass) {
      CertificateParams q1_in = base;
      q1_in.assumed = *q4.implied;
      q1_in.log_tau = log_tau;
      const Certificate q1 = check_certificate(CertificateKind::Q1, q1_in);
      if (q1.pass) return {log_tau, log_h, {q2, q3, q4, q1}};
      const double log_tau1 = solve_threshold(CertificateKind::Q1, q1_in).log_value;
      log_tau = std::min(log_tau, log_tau1) - kLn2;
    } else {
      log_tau -= kLn2;
    }
  }
  throw NoCertificateError("certificate chain did not close after 200 tau reductions");
}

}  // namespace sdepca
