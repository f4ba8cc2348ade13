#pragma once

// pth-moment estimation, decay-pair fitting, and exact second-moment oracles
// for scalar linear systems.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sdepca/integrators.hpp"
#include "sdepca/model.hpp"

namespace sdepca {

/// Two-sided 99% standard normal quantile.
inline constexpr double kZ99 = 2.5758293035489004;

struct MomentSeries {
  std::vector<double> times;
  /// Estimated E|X_n|^p, one entry per time.
  std::vector<double> values;
  /// 99% confidence half-widths; zero for exact series.
  std::vector<double> half_widths;
  std::int64_t n_paths = 0;
  double p = 2.0;
  /// First grid index at which some path diverged. Entries from here on are +inf.
  std::optional<std::int64_t> unstable_from;

  std::size_t size() const { return values.size(); }
};

/// Envelope E|X(t)|^p <= M |x0|^p exp(-gamma t) recovered from data.
struct DecayFit {
  double M = 1.0;
  double gamma = 0.0;
  double window_start = 0.0;
  double window_end = 0.0;
  /// Largest |log residual| of the line fit on the window.
  double residual = 0.0;
  std::int64_t n_points = 0;
};

struct MonteCarloConfig {
  double p = 2.0;
  std::int64_t n_paths = 1000;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Paths per reduction chunk. Fixed so results do not depend on thread count.
inline constexpr std::int64_t kPathsPerChunk = 256;

/// Monte-Carlo estimate of E|X_n|^p on every grid point. Paths are driven by
/// increments keyed on (seed, path_id); per-chunk statistics are merged in
/// path order. For Scheme::exact_gbm the system must be scalar linear and
/// the folded coefficients alpha = a + c, beta = b + d are sampled exactly.
MomentSeries estimate_pth_moment(const System& spec, Scheme scheme, const Eigen::VectorXd& x0, const GridSpec& grid,
                                 const MonteCarloConfig& mc);

/// Least-squares line through (t, ln value) over usable points after a 10%
/// burn-in; gamma = -slope. M is raised by the largest positive residual over
/// all usable points so the envelope holds pointwise, including t = 0.
DecayFit fit_decay_rate(const MomentSeries& series);

/// Scalar linear coefficients f = a x, g = b x, u1 = c x, u2 = d x.
struct ScalarLinear {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;

  double alpha() const { return a + c; }
  double beta() const { return b + d; }
};

/// Extracts (a, b, c, d) from a scalar linear system.
ScalarLinear scalar_coefficients(const System& spec);

enum class MomentKind { sde, sdepca };

/// Exact E X_n^2 of either EM scheme by deterministic recursion on the grid.
MomentSeries em_linear_second_moment(MomentKind kind, const ScalarLinear& coef, const GridSpec& grid, double x0);

/// Exact E x(t)^2 of the delayed SDE on the grid points. Within a block the
/// triple (E x^2, E x v, E v^2), v = x(k tau), solves a linear ODE which is
/// integrated by a matrix exponential and reset at block boundaries.
MomentSeries sdepca_exact_second_moment(const ScalarLinear& coef, double tau, std::span<const double> times, double x0);
MomentSeries sdepca_exact_second_moment(const ScalarLinear& coef, const GridSpec& grid, double x0);

/// Closed forms for the log of E|.|^2 / x0^2 at a single point. These avoid
/// stepping through the grid, so they stay usable for step sizes far below
/// what a recursion could traverse.
namespace exact {

/// p (alpha + (p-1) beta^2 / 2): exponential rate of E|y(t)|^p for GBM.
double gbm_log_moment_rate(double alpha, double beta, double p);

/// log((1 + alpha h)^2 + beta^2 h), accurate for tiny h.
double em_sde_log_step_factor(const ScalarLinear& coef, double h);

/// log growth of E X^2 over one full block of m EM-SDEPCA steps.
double em_sdepca_log_block_factor(const ScalarLinear& coef, double tau, std::uint64_t m);

/// log E X^2_{k m + l} / x0^2 for the EM-SDEPCA. k may exceed 2^53 (integral double).
double em_sdepca_log_second_moment(const ScalarLinear& coef, double tau, std::uint64_t m, double k, std::uint64_t l);

/// log growth of E x^2 over one block of length tau for the delayed SDE.
double sdepca_log_block_factor(const ScalarLinear& coef, double tau);

/// log E x(t)^2 / x0^2 for the delayed SDE.
double sdepca_log_second_moment(const ScalarLinear& coef, double tau, double t);

/// exp(M) - I for a small dense matrix, computed without cancellation.
Eigen::Matrix3d expm_minus_identity(const Eigen::Matrix3d& m);

/// (I + E)^n - I by binary powering on the excess.
Eigen::Matrix3d power_minus_identity(const Eigen::Matrix3d& excess, std::uint64_t n);

}  // namespace exact

}  // namespace sdepca
