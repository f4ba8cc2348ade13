#pragma once

// Strong-error study: EM for the folded scalar linear SDE against the exact
// GBM solution, both driven by the same Brownian path. Increments are drawn
// on the finest grid and summed onto coarser ones.

#include <cstdint>
#include <vector>

#include "sdepca/model.hpp"

namespace sdepca {

struct StrongErrorRow {
  double h = 0.0;
  std::int64_t n_steps = 0;
  /// Monte-Carlo mean of |y(T) - Y_N|^p.
  double error_p = 0.0;
  /// (error_p)^{1/p}.
  double root_error = 0.0;
};

struct StrongErrorStudy {
  double p = 2.0;
  double horizon = 1.0;
  std::int64_t n_paths = 0;
  std::vector<StrongErrorRow> rows;
  /// Least-squares slope of log error_p against log h; about p/2 for EM.
  double slope = 0.0;
};

struct StrongErrorConfig {
  double p = 2.0;
  double horizon = 1.0;
  /// Step sizes 2^-coarsest_level .. 2^-finest_level.
  int coarsest_level = 4;
  int finest_level = 9;
  std::int64_t n_paths = 10000;
  std::uint64_t seed = 0;
  int threads = 1;
};

StrongErrorStudy strong_error_study(const System& spec, double x0, const StrongErrorConfig& config);

/// Least-squares slope of ys against xs.
double least_squares_slope(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace sdepca
