#pragma once

// Coefficient systems for the delayed SDE
//
//   dx = [f(x(t)) + u1(x([t/tau] tau))] dt + [g(x(t)) + u2(x([t/tau] tau))] dw,
//
// under a global Lipschitz bound K and f(0) = g(0) = u1(0) = u2(0) = 0.
// Two families are supported: linear maps given by matrices, and scalar maps
// drawn from a small catalogue with known slope bounds. Arbitrary callables
// are deliberately not accepted since their Lipschitz constant cannot be
// certified.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sdepca/errors.hpp"

namespace sdepca {

enum class SystemKind { linear, scalar_nonlinear };

enum class CatalogueShape { sine, tanh };

/// x -> scale * shape(x). The slope of either shape is bounded by one, so
/// |scale| is a Lipschitz constant and the map vanishes at the origin.
template <typename Scalar>
struct CatalogueMap {
  CatalogueShape shape = CatalogueShape::sine;
  Scalar scale = Scalar(0);

  Scalar operator()(Scalar x) const {
    using std::sin;
    using std::tanh;
    return shape == CatalogueShape::sine ? scale * sin(x) : scale * tanh(x);
  }
  Scalar slope_bound() const {
    using std::abs;
    return abs(scale);
  }
};

inline std::string_view to_string(CatalogueShape s) {
  return s == CatalogueShape::sine ? "sin" : "tanh";
}

inline CatalogueShape parse_catalogue_shape(std::string_view name) {
  if (name == "sin" || name == "sine") return CatalogueShape::sine;
  if (name == "tanh") return CatalogueShape::tanh;
  throw ValidationError("unknown catalogue map '" + std::string(name) + "' (expected sin or tanh)");
}

template <typename Scalar>
class SystemSpec {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  SystemKind kind() const { return kind_; }
  bool is_linear() const { return kind_ == SystemKind::linear; }
  bool is_scalar() const { return dim_ == 1 && brownian_dim_ == 1; }
  Eigen::Index dim() const { return dim_; }
  Eigen::Index brownian_dim() const { return brownian_dim_; }
  Scalar lipschitz() const { return lipschitz_; }

  // Linear data. Empty for catalogue systems.
  const Matrix& A() const { return A_; }
  const Matrix& C() const { return C_; }
  const std::vector<Matrix>& B() const { return B_; }
  const std::vector<Matrix>& D() const { return D_; }

  // Catalogue data. Meaningful only for scalar_nonlinear systems.
  const CatalogueMap<Scalar>& f_map() const { return maps_[0]; }
  const CatalogueMap<Scalar>& g_map() const { return maps_[1]; }
  const CatalogueMap<Scalar>& u1_map() const { return maps_[2]; }
  const CatalogueMap<Scalar>& u2_map() const { return maps_[3]; }

  /// Writes f(x) + u1(xd) into drift and g(x) + u2(xd) into diffusion
  /// (d x m). The outputs must already have the right shape.
  template <typename X, typename XD, typename Drift, typename Diffusion>
  void evaluate(const Eigen::MatrixBase<X>& x, const Eigen::MatrixBase<XD>& xd,
                Eigen::MatrixBase<Drift>& drift, Eigen::MatrixBase<Diffusion>& diffusion) const {
    if (kind_ == SystemKind::linear) {
      drift.noalias() = A_ * x;
      drift.noalias() += C_ * xd;
      for (Eigen::Index i = 0; i < brownian_dim_; ++i) {
        diffusion.col(i).noalias() = B_[static_cast<std::size_t>(i)] * x;
        diffusion.col(i).noalias() += D_[static_cast<std::size_t>(i)] * xd;
      }
    } else {
      drift(0) = maps_[0](x(0)) + maps_[2](xd(0));
      diffusion(0, 0) = maps_[1](x(0)) + maps_[3](xd(0));
    }
  }

  template <typename S>
  friend SystemSpec<S> make_linear_system(const typename SystemSpec<S>::Matrix&,
                                          const std::vector<typename SystemSpec<S>::Matrix>&,
                                          const typename SystemSpec<S>::Matrix&,
                                          const std::vector<typename SystemSpec<S>::Matrix>&);
  template <typename S>
  friend SystemSpec<S> make_scalar_nonlinear_system(const CatalogueMap<S>&, const CatalogueMap<S>&,
                                                    const CatalogueMap<S>&, const CatalogueMap<S>&);

 private:
  SystemSpec() = default;

  SystemKind kind_ = SystemKind::linear;
  Eigen::Index dim_ = 0;
  Eigen::Index brownian_dim_ = 0;
  Scalar lipschitz_ = Scalar(0);
  Matrix A_, C_;
  std::vector<Matrix> B_, D_;
  CatalogueMap<Scalar> maps_[4];
};

using System = SystemSpec<double>;

namespace detail {

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.array().isFinite().all();
}

template <typename Scalar>
Scalar spectral_norm(const typename SystemSpec<Scalar>::Matrix& m) {
  if (m.size() == 0) return Scalar(0);
  Eigen::JacobiSVD<typename SystemSpec<Scalar>::Matrix> svd(m);
  return svd.singularValues()(0);
}

}  // namespace detail

/// Smallest Lipschitz constant this library certifies for the system:
/// max(|A|_2, |C|_2, sqrt(sum |B_i|_2^2), sqrt(sum |D_i|_2^2)) for linear
/// systems (diffusion measured in the Frobenius norm), max slope bound for
/// catalogue systems.
template <typename Scalar>
Scalar lipschitz_bound(const SystemSpec<Scalar>& spec) {
  using std::max;
  using std::sqrt;
  if (!spec.is_linear()) {
    return max({spec.f_map().slope_bound(), spec.g_map().slope_bound(), spec.u1_map().slope_bound(),
                spec.u2_map().slope_bound()});
  }
  auto column_bound = [](const auto& mats) {
    Scalar acc(0);
    for (const auto& m : mats) {
      const Scalar s = detail::spectral_norm<Scalar>(m);
      acc += s * s;
    }
    return sqrt(acc);
  };
  return max({detail::spectral_norm<Scalar>(spec.A()), detail::spectral_norm<Scalar>(spec.C()),
              column_bound(spec.B()), column_bound(spec.D())});
}

template <typename Scalar>
SystemSpec<Scalar> make_linear_system(const typename SystemSpec<Scalar>::Matrix& A,
                                      const std::vector<typename SystemSpec<Scalar>::Matrix>& Bs,
                                      const typename SystemSpec<Scalar>::Matrix& C,
                                      const std::vector<typename SystemSpec<Scalar>::Matrix>& Ds) {
  const Eigen::Index d = A.rows();
  if (d < 1 || A.cols() != d) throw ShapeError("drift matrix A must be square with d >= 1");
  if (C.rows() != d || C.cols() != d) throw ShapeError("delayed drift matrix C must be d x d");
  if (Bs.empty()) throw ShapeError("at least one diffusion matrix is required");
  if (Bs.size() != Ds.size()) throw ShapeError("diffusion lists B and D must have equal length");
  for (const auto* list : {&Bs, &Ds}) {
    for (const auto& m : *list) {
      if (m.rows() != d || m.cols() != d) throw ShapeError("diffusion matrices must be d x d");
      if (!detail::all_finite(m)) throw ValidationError("nonfinite diffusion matrix entry");
    }
  }
  if (!detail::all_finite(A) || !detail::all_finite(C)) throw ValidationError("nonfinite drift matrix entry");

  SystemSpec<Scalar> spec;
  spec.kind_ = SystemKind::linear;
  spec.dim_ = d;
  spec.brownian_dim_ = static_cast<Eigen::Index>(Bs.size());
  spec.A_ = A;
  spec.C_ = C;
  spec.B_ = Bs;
  spec.D_ = Ds;
  spec.lipschitz_ = lipschitz_bound(spec);
  return spec;
}

/// Scalar system f(x) = a x, g(x) = b x, u1(x) = c x, u2(x) = d x.
template <typename Scalar = double>
SystemSpec<Scalar> make_scalar_linear_system(Scalar a, Scalar b, Scalar c, Scalar d) {
  using M = typename SystemSpec<Scalar>::Matrix;
  return make_linear_system<Scalar>(M::Constant(1, 1, a), {M::Constant(1, 1, b)}, M::Constant(1, 1, c),
                                    {M::Constant(1, 1, d)});
}

template <typename Scalar>
SystemSpec<Scalar> make_scalar_nonlinear_system(const CatalogueMap<Scalar>& f, const CatalogueMap<Scalar>& g,
                                                const CatalogueMap<Scalar>& u1, const CatalogueMap<Scalar>& u2) {
  using std::isfinite;
  for (const auto* m : {&f, &g, &u1, &u2}) {
    if (!isfinite(m->scale)) throw ValidationError("nonfinite catalogue scale");
  }
  SystemSpec<Scalar> spec;
  spec.kind_ = SystemKind::scalar_nonlinear;
  spec.dim_ = 1;
  spec.brownian_dim_ = 1;
  spec.maps_[0] = f;
  spec.maps_[1] = g;
  spec.maps_[2] = u1;
  spec.maps_[3] = u2;
  spec.lipschitz_ = lipschitz_bound(spec);
  return spec;
}

template <typename Scalar>
struct Coefficients {
  typename SystemSpec<Scalar>::Vector drift;
  typename SystemSpec<Scalar>::Matrix diffusion;
};

/// drift = f(x) + u1(x_delayed), diffusion = g(x) + u2(x_delayed).
/// With x_delayed == x these are the folded SDE coefficients F and G.
template <typename Scalar>
Coefficients<Scalar> eval_coefficients(const SystemSpec<Scalar>& spec,
                                       const typename SystemSpec<Scalar>::Vector& x,
                                       const typename SystemSpec<Scalar>::Vector& x_delayed) {
  if (x.size() != spec.dim() || x_delayed.size() != spec.dim()) {
    throw ShapeError("state vectors must have length d = " + std::to_string(spec.dim()));
  }
  Coefficients<Scalar> out{typename SystemSpec<Scalar>::Vector(spec.dim()),
                           typename SystemSpec<Scalar>::Matrix(spec.dim(), spec.brownian_dim())};
  spec.evaluate(x, x_delayed, out.drift, out.diffusion);
  return out;
}

/// Largest observed |phi(x) - phi(y)| / |x - y| over random pairs in the
/// ball of the given radius, maximized over the four coefficient maps.
/// A sampled sanity check of the certified constant, not a proof.
template <typename Scalar>
Scalar max_lipschitz_ratio(const SystemSpec<Scalar>& spec, int n_pairs, Scalar radius, std::uint64_t seed) {
  using Vector = typename SystemSpec<Scalar>::Vector;
  using Matrix = typename SystemSpec<Scalar>::Matrix;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  const Eigen::Index d = spec.dim();
  auto draw = [&] {
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = Scalar(normal(rng));
    const double r = radius * std::pow(unif(rng), 1.0 / static_cast<double>(d));
    return Vector(v.normalized() * Scalar(r));
  };
  const Vector zero = Vector::Zero(d);
  Vector drift_x(d), drift_y(d);
  Matrix diff_x(d, spec.brownian_dim()), diff_y(d, spec.brownian_dim());
  Scalar worst(0);
  for (int k = 0; k < n_pairs; ++k) {
    const Vector x = draw();
    const Vector y = draw();
    const Scalar dist = (x - y).norm();
    if (dist == Scalar(0)) continue;
    // Evaluate each map in isolation by zeroing the other argument.
    spec.evaluate(x, zero, drift_x, diff_x);
    spec.evaluate(y, zero, drift_y, diff_y);
    worst = std::max({worst, Scalar((drift_x - drift_y).norm() / dist), Scalar((diff_x - diff_y).norm() / dist)});
    spec.evaluate(zero, x, drift_x, diff_x);
    spec.evaluate(zero, y, drift_y, diff_y);
    worst = std::max({worst, Scalar((drift_x - drift_y).norm() / dist), Scalar((diff_x - diff_y).norm() / dist)});
  }
  return worst;
}

/// Delay tau split into m_sub substeps of length h = tau / m_sub. The
/// horizon is rounded up to a whole number of delay blocks.
class GridSpec {
 public:
  GridSpec(double tau, std::int64_t m_sub, double horizon) : tau_(tau), m_sub_(m_sub), horizon_(horizon) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("tau must be positive and finite");
    if (m_sub < 1) throw ValidationError("m_sub must be a positive integer");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ValidationError("horizon must be positive and finite");
    const double blocks = std::ceil(horizon / tau - 1e-9);
    if (blocks * static_cast<double>(m_sub) > 1e12) throw ValidationError("grid has too many steps");
    n_blocks_ = std::max<std::int64_t>(1, static_cast<std::int64_t>(blocks));
  }

  double tau() const { return tau_; }
  std::int64_t m_sub() const { return m_sub_; }
  double h() const { return tau_ / static_cast<double>(m_sub_); }
  /// Requested horizon, before rounding to whole blocks.
  double horizon() const { return horizon_; }
  std::int64_t n_blocks() const { return n_blocks_; }
  std::int64_t n_steps() const { return n_blocks_ * m_sub_; }
  double end_time() const { return time(n_steps()); }
  double time(std::int64_t n) const { return static_cast<double>(n) * h(); }
  /// n = block(n) * m_sub + offset(n), 0 <= offset < m_sub.
  std::int64_t block(std::int64_t n) const { return n / m_sub_; }
  std::int64_t offset(std::int64_t n) const { return n % m_sub_; }
  std::int64_t block_start(std::int64_t n) const { return block(n) * m_sub_; }

 private:
  double tau_;
  std::int64_t m_sub_;
  double horizon_;
  std::int64_t n_blocks_ = 1;
};

}  // namespace sdepca
