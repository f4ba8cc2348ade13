#pragma once

// Euler-Maruyama schemes for the folded SDE and for the delayed (piecewise
// constant argument) SDE, plus the exact geometric Brownian motion sampler
// used as a ground-truth oracle in the scalar linear case.
//
//   em-sde:     Y_{n+1} = Y_n + (f(Y_n) + u1(Y_n)) h + (g(Y_n) + u2(Y_n)) dW_n
//   em-sdepca:  X_{n+1} = X_n + (f(X_n) + u1(X_{km})) h + (g(X_n) + u2(X_{km})) dW_n,
//               with n = k m + l, 0 <= l < m.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sdepca/errors.hpp"
#include "sdepca/model.hpp"

namespace sdepca {

enum class Scheme { em_sde, em_sdepca, exact_gbm };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::em_sde: return "em-sde";
    case Scheme::em_sdepca: return "em-sdepca";
    case Scheme::exact_gbm: return "exact-gbm";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view name) {
  if (name == "em-sde") return Scheme::em_sde;
  if (name == "em-sdepca") return Scheme::em_sdepca;
  if (name == "exact-gbm") return Scheme::exact_gbm;
  throw ValidationError("unknown scheme '" + std::string(name) + "'");
}

/// Paths whose state norm exceeds this bound are treated as diverged.
inline constexpr double kDivergenceBound = 1e12;

template <typename Scalar>
struct Trajectory {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Scheme scheme;
  GridSpec grid;
  /// d x (n_steps + 1); column n is the state at t_n = n h.
  Matrix states;

  std::int64_t size() const { return static_cast<std::int64_t>(states.cols()); }
  std::vector<double> times() const {
    std::vector<double> t(static_cast<std::size_t>(states.cols()));
    for (std::size_t n = 0; n < t.size(); ++n) t[n] = grid.time(static_cast<std::int64_t>(n));
    return t;
  }
  /// Piecewise-constant view: the state at the last grid point <= t.
  auto at_time(double t) const {
    auto n = static_cast<Eigen::Index>(std::floor(t / grid.h()));
    n = std::clamp<Eigen::Index>(n, 0, states.cols() - 1);
    return states.col(n);
  }
};

namespace detail {

template <typename Scalar, typename Inc>
void check_increments(const SystemSpec<Scalar>& spec, const GridSpec& grid, const Eigen::MatrixBase<Inc>& inc) {
  if (inc.rows() != grid.n_steps() || inc.cols() != spec.brownian_dim()) {
    throw ShapeError("increment table must be " + std::to_string(grid.n_steps()) + " x " +
                     std::to_string(spec.brownian_dim()) + ", got " + std::to_string(inc.rows()) + " x " +
                     std::to_string(inc.cols()));
  }
}

/// Runs either EM scheme into `states` (resized to d x (n_steps+1)).
/// Returns the first diverged step index, if any; states past it are unset.
template <typename Scalar, typename X0, typename Inc>
std::optional<std::int64_t> run_em(const SystemSpec<Scalar>& spec, bool delayed, const Eigen::MatrixBase<X0>& x0,
                                   const GridSpec& grid, const Eigen::MatrixBase<Inc>& inc,
                                   typename Trajectory<Scalar>::Matrix& states) {
  using Vector = typename SystemSpec<Scalar>::Vector;
  using Matrix = typename SystemSpec<Scalar>::Matrix;
  const Eigen::Index d = spec.dim();
  const std::int64_t n_steps = grid.n_steps();
  const std::int64_t m = grid.m_sub();
  const Scalar h = Scalar(grid.h());
  states.resize(d, n_steps + 1);
  states.col(0) = x0;
  Vector drift(d);
  Matrix diffusion(d, spec.brownian_dim());
  for (std::int64_t n = 0; n < n_steps; ++n) {
    const Eigen::Index delayed_index = delayed ? (n / m) * m : n;
    spec.evaluate(states.col(n), states.col(delayed_index), drift, diffusion);
    states.col(n + 1) = states.col(n) + drift * h + diffusion * inc.row(n).transpose();
    const Scalar norm = states.col(n + 1).norm();
    if (!(norm <= Scalar(kDivergenceBound))) return n + 1;
  }
  return std::nullopt;
}

template <typename Scalar, typename X0, typename Inc>
Trajectory<Scalar> em_path(const SystemSpec<Scalar>& spec, bool delayed, const Eigen::MatrixBase<X0>& x0,
                           const GridSpec& grid, const Eigen::MatrixBase<Inc>& inc) {
  if (x0.size() != spec.dim()) throw ShapeError("x0 must have length d = " + std::to_string(spec.dim()));
  check_increments(spec, grid, inc);
  Trajectory<Scalar> traj{delayed ? Scheme::em_sdepca : Scheme::em_sde, grid, {}};
  if (auto bad = run_em(spec, delayed, x0, grid, inc, traj.states)) {
    throw DivergedError(static_cast<std::size_t>(*bad),
                        std::string(to_string(traj.scheme)) + " path diverged at step " + std::to_string(*bad));
  }
  return traj;
}

}  // namespace detail

/// EM for the folded SDE. Throws DivergedError on overflow.
template <typename Scalar, typename X0, typename Inc>
Trajectory<Scalar> em_sde_path(const SystemSpec<Scalar>& spec, const Eigen::MatrixBase<X0>& x0, const GridSpec& grid,
                               const Eigen::MatrixBase<Inc>& increments) {
  return detail::em_path(spec, false, x0, grid, increments);
}

/// EM for the delayed SDE: the delayed argument is frozen at the start of
/// each block of m_sub steps. With m_sub = 1 this is em_sde_path bit for bit.
template <typename Scalar, typename X0, typename Inc>
Trajectory<Scalar> em_sdepca_path(const SystemSpec<Scalar>& spec, const Eigen::MatrixBase<X0>& x0,
                                  const GridSpec& grid, const Eigen::MatrixBase<Inc>& increments) {
  return detail::em_path(spec, true, x0, grid, increments);
}

/// Exact solution of dy = alpha y dt + beta y dW at the grid points,
/// y(t_n) = x0 exp((alpha - beta^2/2) t_n + beta W(t_n)).
template <typename Scalar, typename Inc>
Trajectory<Scalar> gbm_exact_path(Scalar alpha, Scalar beta, Scalar x0, const GridSpec& grid,
                                  const Eigen::MatrixBase<Inc>& increments) {
  using std::exp;
  if (increments.rows() != grid.n_steps() || increments.cols() != 1) {
    throw ShapeError("exact GBM sampler needs an n_steps x 1 increment table");
  }
  if (!std::isfinite(double(alpha)) || !std::isfinite(double(beta)) || !std::isfinite(double(x0))) {
    throw ValidationError("GBM parameters must be finite");
  }
  Trajectory<Scalar> traj{Scheme::exact_gbm, grid, {}};
  traj.states.resize(1, grid.n_steps() + 1);
  traj.states(0, 0) = x0;
  const Scalar drift = alpha - beta * beta / Scalar(2);
  Scalar w(0);
  for (std::int64_t n = 0; n < grid.n_steps(); ++n) {
    w += increments(n, 0);
    traj.states(0, n + 1) = x0 * exp(drift * Scalar(grid.time(n + 1)) + beta * w);
  }
  return traj;
}

}  // namespace sdepca
