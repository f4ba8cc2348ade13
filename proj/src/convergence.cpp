#include "sdepca/convergence.hpp"

#include <cmath>
#include <string>

#include "sdepca/errors.hpp"
#include "sdepca/integrators.hpp"
#include "sdepca/moments.hpp"
#include "sdepca/parallel.hpp"
#include "sdepca/paths.hpp"

namespace sdepca {

double least_squares_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw InsufficientDataError("slope fit needs two or more points");
  double xm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xm += xs[i];
    ym += ys[i];
  }
  xm /= static_cast<double>(xs.size());
  ym /= static_cast<double>(xs.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - xm) * (xs[i] - xm);
    sxy += (xs[i] - xm) * (ys[i] - ym);
  }
  return sxy / sxx;
}

StrongErrorStudy strong_error_study(const System& spec, double x0, const StrongErrorConfig& config) {
  const ScalarLinear coef = scalar_coefficients(spec);
  if (!(config.p >= 2.0)) throw DomainError("moment order p must satisfy p >= 2");
  if (config.coarsest_level < 0 || config.finest_level <= config.coarsest_level || config.finest_level > 20) {
    throw ValidationError("need 0 <= coarsest_level < finest_level <= 20");
  }
  if (config.n_paths < 2) throw ValidationError("at least two paths are required");
  if (!(config.horizon > 0.0)) throw ValidationError("horizon must be positive");

  const int levels = config.finest_level - config.coarsest_level + 1;
  const double h_fine = config.horizon * std::ldexp(1.0, -config.finest_level);
  const GridSpec fine_grid(h_fine, 1, config.horizon);
  const std::int64_t n_chunks = (config.n_paths + kPathsPerChunk - 1) / kPathsPerChunk;
  // Per chunk, per level: sum of |error|^p in path order.
  std::vector<std::vector<double>> sums(static_cast<std::size_t>(n_chunks), std::vector<double>(levels, 0.0));

  parallel_for_chunks(n_chunks, config.threads, [&](std::int64_t chunk) {
    auto& acc = sums[static_cast<std::size_t>(chunk)];
    IncrementTable fine;
    const std::int64_t first = chunk * kPathsPerChunk;
    const std::int64_t last = std::min(config.n_paths, first + kPathsPerChunk);
    Eigen::VectorXd start(1);
    start(0) = x0;
    for (std::int64_t path = first; path < last; ++path) {
      generate_increments_into({config.seed, static_cast<std::uint64_t>(path), fine_grid.n_steps(), h_fine, 1}, fine);
      const double exact = gbm_exact_path(coef.alpha(), coef.beta(), x0, fine_grid, fine).states(0, fine_grid.n_steps());
      for (int level = 0; level < levels; ++level) {
        const int k = config.coarsest_level + level;
        const std::int64_t r = std::int64_t{1} << (config.finest_level - k);
        const GridSpec grid(config.horizon * std::ldexp(1.0, -k), 1, config.horizon);
        const auto traj = em_sde_path(spec, start, grid, aggregate_increments(fine, r));
        const double err = std::fabs(exact - traj.states(0, grid.n_steps()));
        acc[static_cast<std::size_t>(level)] += std::pow(err, config.p);
      }
    }
  });

  StrongErrorStudy study;
  study.p = config.p;
  study.horizon = config.horizon;
  study.n_paths = config.n_paths;
  std::vector<double> log_h, log_err;
  for (int level = 0; level < levels; ++level) {
    double total = 0.0;
    for (const auto& chunk : sums) total += chunk[static_cast<std::size_t>(level)];
    StrongErrorRow row;
    const int k = config.coarsest_level + level;
    row.h = config.horizon * std::ldexp(1.0, -k);
    row.n_steps = std::int64_t{1} << k;
    row.error_p = total / static_cast<double>(config.n_paths);
    row.root_error = std::pow(row.error_p, 1.0 / config.p);
    study.rows.push_back(row);
    log_h.push_back(std::log(row.h));
    log_err.push_back(std::log(row.error_p));
  }
  study.slope = least_squares_slope(log_h, log_err);
  return study;
}

}  // namespace sdepca
