#include "sdepca/lyapunov.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "sdepca/errors.hpp"

namespace sdepca {

namespace {

struct FoldedTerms {
  double y_dot_F = 0.0;
  double G_sq = 0.0;      // |G(y)|^2, Frobenius
  double yT_G_sq = 0.0;   // |y'G(y)|^2
};

FoldedTerms folded_terms(const System& spec, const Eigen::VectorXd& y) {
  Eigen::VectorXd F(spec.dim());
  Eigen::MatrixXd G(spec.dim(), spec.brownian_dim());
  spec.evaluate(y, y, F, G);
  return {y.dot(F), G.squaredNorm(), (y.transpose() * G).squaredNorm()};
}

void require_p(double p) {
  if (!(p >= 2.0) || !std::isfinite(p)) throw DomainError("moment order p must satisfy p >= 2");
}

// Point on S^{d-1} from d-1 hyperspherical angles.
Eigen::VectorXd from_angles(const std::vector<double>& phi) {
  const auto d = static_cast<Eigen::Index>(phi.size() + 1);
  Eigen::VectorXd y(d);
  double sin_prod = 1.0;
  for (Eigen::Index i = 0; i + 1 < d; ++i) {
    y(i) = sin_prod * std::cos(phi[static_cast<std::size_t>(i)]);
    sin_prod *= std::sin(phi[static_cast<std::size_t>(i)]);
  }
  y(d - 1) = sin_prod;
  return y;
}

class SphereSearch {
 public:
  SphereSearch(const System& spec, double p) : spec_(spec), p_(p) {}

  void consider(const Eigen::VectorXd& y) {
    const double q = assumption_form(spec_, p_, y);
    ++samples_;
    if (!found_ || q > best_q_) {
      found_ = true;
      best_q_ = q;
      best_ = y;
    }
  }

  // Compass search on the sphere from the current best point.
  void refine(double initial_step) {
    const Eigen::Index d = best_.size();
    double step = initial_step;
    while (step > 1e-13) {
      // Orthonormal basis of the tangent space at best_.
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(best_);
      const Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
      bool improved = false;
      for (Eigen::Index j = 1; j < d && !improved; ++j) {
        for (double sign : {1.0, -1.0}) {
          const Eigen::VectorXd trial = (best_ + sign * step * basis.col(j)).normalized();
          const double q = assumption_form(spec_, p_, trial);
          ++samples_;
          if (q > best_q_) {
            best_q_ = q;
            best_ = trial;
            improved = true;
            break;
          }
        }
      }
      if (!improved) step /= 2.0;
    }
  }

  double best_q() const { return best_q_; }
  const Eigen::VectorXd& best() const { return best_; }
  std::int64_t samples() const { return samples_; }

 private:
  const System& spec_;
  double p_;
  bool found_ = false;
  double best_q_ = 0.0;
  Eigen::VectorXd best_;
  std::int64_t samples_ = 0;
};

}  // namespace

std::string_view to_string(LyapunovMethod m) {
  switch (m) {
    case LyapunovMethod::scalar_closed_form: return "scalar-closed-form";
    case LyapunovMethod::sphere_grid: return "sphere-grid";
    case LyapunovMethod::random_sphere: return "random-sphere";
  }
  return "?";
}

double assumption_form(const System& spec, double p, const Eigen::VectorXd& y) {
  if (y.size() != spec.dim()) throw ShapeError("y must have length d");
  const FoldedTerms t = folded_terms(spec, y);
  return y.squaredNorm() * (2.0 * t.y_dot_F + t.G_sq) - (2.0 - p) * t.yT_G_sq;
}

LyapunovReport assumption_margin(const System& spec, double p, const SphereSampling& sampling) {
  require_p(p);
  if (!spec.is_linear()) {
    throw UnsupportedError("Lyapunov margin needs a linear system (degree-4 homogeneity of Q)");
  }
  LyapunovReport report;
  report.p = p;
  const Eigen::Index d = spec.dim();
  if (d == 1) {
    // Q(y) = y^4 (2 a_eff + (p-1) |b_eff|^2) for every y.
    report.worst_point = Eigen::VectorXd::Ones(1);
    report.lambda = -assumption_form(spec, p, report.worst_point);
    report.n_samples = 1;
    report.method = LyapunovMethod::scalar_closed_form;
    return report;
  }
  if (sampling.resolution < 2) throw ValidationError("sphere grid resolution must be at least 2");

  SphereSearch search(spec, p);
  const int n = sampling.resolution;
  // Q is even, so the last angle covers a half circle.
  double grid_points = n;
  for (Eigen::Index i = 0; i + 2 < d; ++i) grid_points *= (n + 1);
  const bool use_grid = grid_points <= static_cast<double>(sampling.max_grid_points);
  if (use_grid) {
    std::vector<int> idx(static_cast<std::size_t>(d - 1), 0);
    std::vector<double> phi(idx.size());
    const double pi = std::numbers::pi;
    while (true) {
      for (std::size_t i = 0; i < idx.size(); ++i) {
        phi[i] = pi * idx[i] / n;
      }
      search.consider(from_angles(phi));
      // Odometer increment: inner angles take n+1 values on [0, pi], the last n values on [0, pi).
      std::size_t k = 0;
      for (; k < idx.size(); ++k) {
        const int limit = k + 1 < idx.size() ? n + 1 : n;
        if (++idx[k] < limit) break;
        idx[k] = 0;
      }
      if (k == idx.size()) break;
    }
  }
  std::mt19937_64 rng(sampling.seed);
  std::normal_distribution<double> normal;
  for (std::int64_t i = 0; i < sampling.random_probes; ++i) {
    Eigen::VectorXd y(d);
    for (Eigen::Index j = 0; j < d; ++j) y(j) = normal(rng);
    if (y.norm() > 0.0) search.consider(y.normalized());
  }
  search.refine(std::numbers::pi / n);

  report.worst_point = search.best();
  report.lambda = -search.best_q();
  report.n_samples = search.samples();
  report.method = use_grid ? LyapunovMethod::sphere_grid : LyapunovMethod::random_sphere;
  return report;
}

double generator_value(const System& spec, double p, const Eigen::VectorXd& y) {
  require_p(p);
  if (y.size() != spec.dim()) throw ShapeError("y must have length d");
  const double r = y.norm();
  if (r == 0.0) {
    if (p < 4.0) throw DomainError("generator of |y|^p at y = 0 is undefined for p < 4");
    return 0.0;
  }
  const FoldedTerms t = folded_terms(spec, y);
  const double r_pm2 = std::pow(r, p - 2.0);
  const double r_pm4 = std::pow(r, p - 4.0);
  return p * r_pm2 * t.y_dot_F + 0.5 * p * r_pm2 * t.G_sq + 0.5 * p * (p - 2.0) * r_pm4 * t.yT_G_sq;
}

double lyapunov_decay_bound(double lambda, double p, const Eigen::VectorXd& x0, double t) {
  require_p(p);
  if (!(lambda > 0.0)) throw NoCertificateError("Lyapunov margin is not positive; no decay bound");
  if (!(t >= 0.0)) throw DomainError("time must be nonnegative");
  return std::pow(x0.norm(), p) * std::exp(-0.5 * lambda * p * t);
}

}  // namespace sdepca
