#include "sdepca/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sdepca/errors.hpp"
#include "sdepca/parallel.hpp"
#include "sdepca/paths.hpp"

namespace sdepca {

namespace {

// Running mean / M2 per time index (Welford), merged across chunks with
// Chan's pairwise update.
struct RunningStats {
  std::vector<std::int64_t> count;
  std::vector<double> mean;
  std::vector<double> m2;
  std::optional<std::int64_t> first_divergence;

  explicit RunningStats(std::size_t n) : count(n, 0), mean(n, 0.0), m2(n, 0.0) {}

  void push(std::size_t i, double v) {
    const auto k = ++count[i];
    const double delta = v - mean[i];
    mean[i] += delta / static_cast<double>(k);
    m2[i] += delta * (v - mean[i]);
  }

  void merge(const RunningStats& other) {
    for (std::size_t i = 0; i < count.size(); ++i) {
      const auto nb = other.count[i];
      if (nb == 0) continue;
      const auto na = count[i];
      const auto n = na + nb;
      const double delta = other.mean[i] - mean[i];
      mean[i] += delta * static_cast<double>(nb) / static_cast<double>(n);
      m2[i] += other.m2[i] + delta * delta * static_cast<double>(na) * static_cast<double>(nb) / static_cast<double>(n);
      count[i] = n;
    }
    if (other.first_divergence && (!first_divergence || *other.first_divergence < *first_divergence)) {
      first_divergence = other.first_divergence;
    }
  }
};

double pth_power(double norm, double p) { return p == 2.0 ? norm * norm : std::pow(norm, p); }

void check_coefficients(const ScalarLinear& c) {
  if (!std::isfinite(c.a) || !std::isfinite(c.b) || !std::isfinite(c.c) || !std::isfinite(c.d)) {
    throw ValidationError("scalar coefficients must be finite");
  }
}

Eigen::Matrix3d sdepca_generator(const ScalarLinear& c) {
  Eigen::Matrix3d g;
  g << 2.0 * c.a + c.b * c.b, 2.0 * c.c + 2.0 * c.b * c.d, c.d * c.d,  //
      0.0, c.a, c.c,                                                  //
      0.0, 0.0, 0.0;
  return g;
}

Eigen::Matrix3d em_sdepca_step_excess(const ScalarLinear& c, double h) {
  Eigen::Matrix3d e;
  e << 2.0 * c.a * h + c.a * c.a * h * h + c.b * c.b * h, 2.0 * (1.0 + c.a * h) * c.c * h + 2.0 * c.b * c.d * h,
      c.c * c.c * h * h + c.d * c.d * h,  //
      0.0, c.a * h, c.c * h,              //
      0.0, 0.0, 0.0;
  return e;
}

// log of the first component of (I + excess) (1, 1, 1)^T.
double log_first_row_growth(const Eigen::Matrix3d& excess) {
  const double grow = excess.row(0).sum();
  if (!(grow > -1.0)) return -std::numeric_limits<double>::infinity();
  return std::log1p(grow);
}

}  // namespace

ScalarLinear scalar_coefficients(const System& spec) {
  if (!spec.is_linear() || !spec.is_scalar()) {
    throw UnsupportedError("operation requires a scalar linear system (d = 1, one Brownian motion)");
  }
  return {spec.A()(0, 0), spec.B()[0](0, 0), spec.C()(0, 0), spec.D()[0](0, 0)};
}

MomentSeries estimate_pth_moment(const System& spec, Scheme scheme, const Eigen::VectorXd& x0, const GridSpec& grid,
                                 const MonteCarloConfig& mc) {
  if (!(mc.p >= 2.0) || !std::isfinite(mc.p)) throw DomainError("moment order p must satisfy p >= 2");
  if (mc.n_paths < 2) throw ValidationError("at least two paths are required");
  if (mc.threads < 1) throw ValidationError("thread count must be positive");
  if (x0.size() != spec.dim()) throw ShapeError("x0 must have length d = " + std::to_string(spec.dim()));
  if (!x0.allFinite()) throw ValidationError("x0 must be finite");

  ScalarLinear gbm;
  if (scheme == Scheme::exact_gbm) gbm = scalar_coefficients(spec);

  const auto n_points = static_cast<std::size_t>(grid.n_steps() + 1);
  const std::int64_t n_chunks = (mc.n_paths + kPathsPerChunk - 1) / kPathsPerChunk;
  std::vector<RunningStats> chunks(static_cast<std::size_t>(n_chunks), RunningStats(0));

  parallel_for_chunks(n_chunks, mc.threads, [&](std::int64_t chunk) {
    RunningStats stats(n_points);
    IncrementTable inc;
    Trajectory<double>::Matrix states;
    const std::int64_t first = chunk * kPathsPerChunk;
    const std::int64_t last = std::min(mc.n_paths, first + kPathsPerChunk);
    for (std::int64_t path = first; path < last; ++path) {
      generate_increments_into({mc.seed, static_cast<std::uint64_t>(path), grid.n_steps(), grid.h(),
                                spec.brownian_dim()},
                               inc);
      std::int64_t valid = grid.n_steps() + 1;
      if (scheme == Scheme::exact_gbm) {
        states = gbm_exact_path(gbm.alpha(), gbm.beta(), x0(0), grid, inc).states;
      } else if (auto bad = detail::run_em(spec, scheme == Scheme::em_sdepca, x0, grid, inc, states)) {
        valid = *bad;
        if (!stats.first_divergence || valid < *stats.first_divergence) stats.first_divergence = valid;
      }
      for (std::int64_t n = 0; n < valid; ++n) {
        stats.push(static_cast<std::size_t>(n), pth_power(states.col(n).norm(), mc.p));
      }
    }
    chunks[static_cast<std::size_t>(chunk)] = std::move(stats);
  });

  RunningStats total(n_points);
  for (const auto& c : chunks) total.merge(c);

  MomentSeries out;
  out.n_paths = mc.n_paths;
  out.p = mc.p;
  out.unstable_from = total.first_divergence;
  out.times.resize(n_points);
  out.values.resize(n_points);
  out.half_widths.resize(n_points);
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < n_points; ++n) {
    out.times[n] = grid.time(static_cast<std::int64_t>(n));
    if (out.unstable_from && static_cast<std::int64_t>(n) >= *out.unstable_from) {
      out.values[n] = inf;
      out.half_widths[n] = inf;
      continue;
    }
    const auto k = static_cast<double>(total.count[n]);
    out.values[n] = total.mean[n];
    out.half_widths[n] = kZ99 * std::sqrt(total.m2[n] / (k - 1.0) / k);
  }
  return out;
}

DecayFit fit_decay_rate(const MomentSeries& series) {
  const std::size_t n = series.values.size();
  if (series.times.size() != n || series.half_widths.size() != n) {
    throw ShapeError("moment series columns differ in length");
  }
  if (n == 0 || !(series.values[0] > 0.0) || !std::isfinite(series.values[0])) {
    throw InsufficientDataError("decay fit needs a positive initial moment |x0|^p");
  }
  auto usable = [&](std::size_t i) {
    const double v = series.values[i];
    return std::isfinite(v) && v > 0.0 && std::isfinite(series.half_widths[i]) && series.half_widths[i] < 0.5 * v;
  };
  const double t0 = series.times.front();
  const double burn_in = t0 + 0.1 * (series.times.back() - t0);

  std::vector<double> ts, ys;
  for (std::size_t i = 0; i < n; ++i) {
    if (usable(i) && series.times[i] >= burn_in) {
      ts.push_back(series.times[i]);
      ys.push_back(std::log(series.values[i]));
    }
  }
  if (ts.size() < 5) {
    throw InsufficientDataError("decay fit needs at least 5 usable points after burn-in, found " +
                                std::to_string(ts.size()));
  }
  const double count = static_cast<double>(ts.size());
  double t_mean = 0.0, y_mean = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    t_mean += ts[i];
    y_mean += ys[i];
  }
  t_mean /= count;
  y_mean /= count;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sxx += (ts[i] - t_mean) * (ts[i] - t_mean);
    sxy += (ts[i] - t_mean) * (ys[i] - y_mean);
  }
  if (!(sxx > 0.0)) throw InsufficientDataError("decay fit window has no time spread");
  const double slope = sxy / sxx;
  const double intercept = y_mean - slope * t_mean;

  DecayFit fit;
  fit.gamma = -slope;
  fit.window_start = ts.front();
  fit.window_end = ts.back();
  fit.n_points = static_cast<std::int64_t>(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    fit.residual = std::max(fit.residual, std::fabs(ys[i] - (intercept + slope * ts[i])));
  }
  double margin = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!usable(i)) continue;
    margin = std::max(margin, std::log(series.values[i]) - (intercept + slope * series.times[i]));
  }
  fit.M = std::exp(intercept + margin - std::log(series.values[0]));
  return fit;
}

MomentSeries em_linear_second_moment(MomentKind kind, const ScalarLinear& coef, const GridSpec& grid, double x0) {
  check_coefficients(coef);
  if (!std::isfinite(x0)) throw ValidationError("x0 must be finite");
  const auto n_points = static_cast<std::size_t>(grid.n_steps() + 1);
  MomentSeries out;
  out.p = 2.0;
  out.times.resize(n_points);
  out.values.resize(n_points);
  out.half_widths.assign(n_points, 0.0);
  const double h = grid.h();
  const double a = coef.a, b = coef.b, c = coef.c, d = coef.d;

  if (kind == MomentKind::sde) {
    const double drift = 1.0 + (a + c) * h;
    const double factor = drift * drift + (b + d) * (b + d) * h;
    double v = x0 * x0;
    for (std::size_t n = 0; n < n_points; ++n) {
      out.times[n] = grid.time(static_cast<std::int64_t>(n));
      out.values[n] = v;
      v *= factor;
    }
    return out;
  }

  // (E u^2, E u v, E v^2) with u = X_{km+l}, v = X_{km}.
  double uu = x0 * x0, uv = uu, vv = uu;
  const double one_ah = 1.0 + a * h;
  for (std::size_t n = 0; n < n_points; ++n) {
    if (grid.offset(static_cast<std::int64_t>(n)) == 0) uv = vv = uu;
    out.times[n] = grid.time(static_cast<std::int64_t>(n));
    out.values[n] = uu;
    const double next_uu = one_ah * one_ah * uu + 2.0 * one_ah * c * h * uv + c * c * h * h * vv +
                           h * (b * b * uu + 2.0 * b * d * uv + d * d * vv);
    const double next_uv = one_ah * uv + c * h * vv;
    uu = next_uu;
    uv = next_uv;
  }
  return out;
}

MomentSeries sdepca_exact_second_moment(const ScalarLinear& coef, double tau, std::span<const double> times,
                                        double x0) {
  check_coefficients(coef);
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("tau must be positive");
  if (!std::isfinite(x0)) throw ValidationError("x0 must be finite");
  if (times.empty()) throw ValidationError("time grid is empty");
  const double tol = 1e-9 * tau;
  if (std::fabs(times.front()) > tol) throw ValidationError("time grid must start at 0");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] >= times[i - 1])) throw ValidationError("time grid must be nondecreasing");
  }
  // Every block boundary k tau within the grid's span must be a grid point.
  std::size_t cursor = 0;
  for (double k = 1.0; k * tau <= times.back() + tol; k += 1.0) {
    const double boundary = k * tau;
    while (cursor < times.size() && times[cursor] < boundary - tol) ++cursor;
    if (cursor == times.size() || std::fabs(times[cursor] - boundary) > tol) {
      throw ValidationError("time grid is not block-aligned: missing t = " + std::to_string(boundary));
    }
  }
  MomentSeries out;
  out.p = 2.0;
  out.times.assign(times.begin(), times.end());
  out.half_widths.assign(times.size(), 0.0);
  out.values.resize(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    out.values[i] = x0 * x0 * std::exp(exact::sdepca_log_second_moment(coef, tau, times[i]));
  }
  return out;
}

MomentSeries sdepca_exact_second_moment(const ScalarLinear& coef, const GridSpec& grid, double x0) {
  check_coefficients(coef);
  if (!std::isfinite(x0)) throw ValidationError("x0 must be finite");
  const auto n_points = static_cast<std::size_t>(grid.n_steps() + 1);
  const Eigen::Matrix3d gen = sdepca_generator(coef);
  const double log_block = exact::sdepca_log_block_factor(coef, grid.tau());
  // Within-block profile is shared by all blocks.
  std::vector<double> profile(static_cast<std::size_t>(grid.m_sub()));
  for (std::int64_t l = 0; l < grid.m_sub(); ++l) {
    profile[static_cast<std::size_t>(l)] =
        log_first_row_growth(exact::expm_minus_identity(gen * (static_cast<double>(l) * grid.h())));
  }
  MomentSeries out;
  out.p = 2.0;
  out.times.resize(n_points);
  out.values.resize(n_points);
  out.half_widths.assign(n_points, 0.0);
  for (std::size_t n = 0; n < n_points; ++n) {
    const auto idx = static_cast<std::int64_t>(n);
    out.times[n] = grid.time(idx);
    const double log_value =
        static_cast<double>(grid.block(idx)) * log_block + profile[static_cast<std::size_t>(grid.offset(idx))];
    out.values[n] = x0 * x0 * std::exp(log_value);
  }
  return out;
}

namespace exact {

double gbm_log_moment_rate(double alpha, double beta, double p) {
  return p * (alpha + (p - 1.0) * beta * beta / 2.0);
}

double em_sde_log_step_factor(const ScalarLinear& coef, double h) {
  const double alpha = coef.alpha(), beta = coef.beta();
  const double grow = 2.0 * alpha * h + alpha * alpha * h * h + beta * beta * h;
  if (!(grow > -1.0)) return -std::numeric_limits<double>::infinity();
  return std::log1p(grow);
}

Eigen::Matrix3d expm_minus_identity(const Eigen::Matrix3d& m) {
  const double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Eigen::Matrix3d scaled = m / std::ldexp(1.0, squarings);
  Eigen::Matrix3d term = scaled;
  Eigen::Matrix3d sum = scaled;
  for (int k = 2; k <= 40; ++k) {
    term = (term * scaled / static_cast<double>(k)).eval();
    sum += term;
    if (term.cwiseAbs().maxCoeff() <= 1e-18 * sum.cwiseAbs().maxCoeff()) break;
  }
  // exp(2X) - I = 2 (exp(X) - I) + (exp(X) - I)^2
  for (int i = 0; i < squarings; ++i) sum = (2.0 * sum + sum * sum).eval();
  return sum;
}

Eigen::Matrix3d power_minus_identity(const Eigen::Matrix3d& excess, std::uint64_t n) {
  Eigen::Matrix3d result = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d base = excess;
  while (n != 0) {
    if (n & 1u) result = (result + base + result * base).eval();
    n >>= 1;
    if (n != 0) base = (2.0 * base + base * base).eval();
  }
  return result;
}

double em_sdepca_log_block_factor(const ScalarLinear& coef, double tau, std::uint64_t m) {
  check_coefficients(coef);
  if (m == 0) throw ValidationError("m_sub must be positive");
  const double h = tau / static_cast<double>(m);
  return log_first_row_growth(power_minus_identity(em_sdepca_step_excess(coef, h), m));
}

double em_sdepca_log_second_moment(const ScalarLinear& coef, double tau, std::uint64_t m, double k, std::uint64_t l) {
  if (l >= m) throw ValidationError("block offset must be below m_sub");
  const double h = tau / static_cast<double>(m);
  const double within = log_first_row_growth(power_minus_identity(em_sdepca_step_excess(coef, h), l));
  return k == 0.0 ? within : k * em_sdepca_log_block_factor(coef, tau, m) + within;
}

double sdepca_log_block_factor(const ScalarLinear& coef, double tau) {
  check_coefficients(coef);
  return log_first_row_growth(expm_minus_identity(sdepca_generator(coef) * tau));
}

double sdepca_log_second_moment(const ScalarLinear& coef, double tau, double t) {
  if (!(tau > 0.0)) throw ValidationError("tau must be positive");
  if (!(t >= 0.0)) throw ValidationError("time must be nonnegative");
  const double k = std::floor(t / tau);
  const double s = std::clamp(t - k * tau, 0.0, tau);
  const double within = log_first_row_growth(expm_minus_identity(sdepca_generator(coef) * s));
  return k == 0.0 ? within : k * sdepca_log_block_factor(coef, tau) + within;
}

}  // namespace exact

}  // namespace sdepca
