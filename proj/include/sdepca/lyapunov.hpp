#pragma once

// Lyapunov criterion with V(y) = |y|^p for the folded SDE
//   dy = F(y) dt + G(y) dw,  F = f + u1,  G = g + u2.
//
// The margin lambda is the largest constant with
//   Q(y) = |y|^2 (2 y'F(y) + |G(y)|^2) - (2 - p) |y'G(y)|^2 <= -lambda |y|^4
// for all y; a positive margin certifies E|y(t)|^p <= |x0|^p exp(-lambda p t / 2).
// For linear systems Q is homogeneous of degree four, so the supremum over
// the unit sphere suffices.

#include <Eigen/Dense>

#include <cstdint>
#include <string_view>

#include "sdepca/certificates.hpp"
#include "sdepca/model.hpp"

namespace sdepca {

enum class LyapunovMethod { scalar_closed_form, sphere_grid, random_sphere };

std::string_view to_string(LyapunovMethod m);

struct SphereSampling {
  /// Grid points per angular coordinate.
  int resolution = 128;
  std::int64_t random_probes = 10000;
  std::uint64_t seed = 0;
  /// Grids larger than this are skipped in favour of random probes only.
  std::int64_t max_grid_points = 4'000'000;
};

struct LyapunovReport {
  double p = 2.0;
  /// Positive means the assumption holds with this margin.
  double lambda = 0.0;
  /// Unit vector attaining the sampled maximum of Q.
  Eigen::VectorXd worst_point;
  std::int64_t n_samples = 0;
  LyapunovMethod method = LyapunovMethod::scalar_closed_form;

  /// The decay pair (M = 1, gamma = lambda p / 2) the criterion certifies.
  DecayPair decay_pair() const { return {0.0, lambda * p / 2.0}; }
};

/// Q(y) as defined above.
double assumption_form(const System& spec, double p, const Eigen::VectorXd& y);

/// Margin of the assumption. One-dimensional linear systems use the closed
/// form lambda = -(2 a_eff + (p-1) b_eff^2); d >= 2 maximizes Q over a
/// deterministic sphere grid, refines the best cell by a compass search on
/// the sphere, and adds random probes. Nonlinear systems are unsupported.
LyapunovReport assumption_margin(const System& spec, double p, const SphereSampling& sampling = {});

/// Generator of V = |y|^p:
///   p|y|^{p-2} y'F + (p/2)|y|^{p-2}|G|^2 + (p(p-2)/2)|y|^{p-4}|y'G|^2.
/// y = 0 is rejected for p < 4, where negative powers of |y| appear.
double generator_value(const System& spec, double p, const Eigen::VectorXd& y);

/// |x0|^p exp(-lambda p t / 2). Throws NoCertificateError for lambda <= 0.
double lyapunov_decay_bound(double lambda, double p, const Eigen::VectorXd& x0, double t);

}  // namespace sdepca
