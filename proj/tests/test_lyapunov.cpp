#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <random>

#include "sdepca/lyapunov.hpp"
#include "sdepca/moments.hpp"

using namespace sdepca;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace {

Mat random_matrix(std::mt19937_64& rng, int d, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Mat m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = n(rng);
  return m;
}

// Stable-ish random system: negative definite drift plus small noise.
System random_stable(std::mt19937_64& rng, int d) {
  const Mat R = random_matrix(rng, d, 0.4);
  const Mat A = -Mat::Identity(d, d) * 1.5 + R - R.transpose() + 0.2 * random_matrix(rng, d, 1.0);
  return make_linear_system<double>(A, {random_matrix(rng, d, 0.3), random_matrix(rng, d, 0.2)},
                                    random_matrix(rng, d, 0.2), {random_matrix(rng, d, 0.1), random_matrix(rng, d, 0.1)});
}

// p = 2: Q(y) = y'(F + F' + sum G_i' G_i) y on the unit sphere, so the
// margin is minus the top eigenvalue.
double p2_margin_oracle(const System& s) {
  const Mat F = s.A() + s.C();
  Mat S = F + F.transpose();
  for (std::size_t i = 0; i < s.B().size(); ++i) {
    const Mat G = s.B()[i] + s.D()[i];
    S += G.transpose() * G;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(S);
  return -es.eigenvalues().maxCoeff();
}

Vec random_point(std::mt19937_64& rng, int d, double radius) {
  std::normal_distribution<double> n;
  Vec y(d);
  for (int i = 0; i < d; ++i) y(i) = n(rng);
  return y * (radius / y.norm());
}

}  // namespace

TEST_CASE("scalar closed-form margins") {
  const auto s = make_scalar_linear_system<double>(-0.8, 0.4, -0.2, 0.1);  // a_eff = -1, b_eff = 0.5
  const auto r2 = assumption_margin(s, 2.0);
  CHECK(std::fabs(r2.lambda - 1.75) <= 1e-12);
  CHECK(r2.method == LyapunovMethod::scalar_closed_form);
  CHECK(std::fabs(assumption_margin(s, 3.0).lambda - 1.5) <= 1e-12);
  CHECK(r2.decay_pair().rate == doctest::Approx(1.75));
  CHECK(r2.decay_pair().log_M == 0.0);

  const auto zero = make_scalar_linear_system<double>(0, 0, 0, 0);
  CHECK(assumption_margin(zero, 2.0).lambda == 0.0);
}

TEST_CASE("worst point reproduces the margin") {
  std::mt19937_64 rng(21);
  for (int d : {1, 2, 3}) {
    const auto s = random_stable(rng, d);
    const auto r = assumption_margin(s, 3.0);
    CHECK(r.worst_point.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs(assumption_form(s, 3.0, r.worst_point) + r.lambda) <= 1e-12);
  }
}

TEST_CASE("sphere search matches the eigenvalue oracle at p = 2") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    const int d = 2 + trial % 2;
    const auto s = random_stable(rng, d);
    const auto r = assumption_margin(s, 2.0);
    const double oracle = p2_margin_oracle(s);
    CHECK(r.lambda == doctest::Approx(oracle).epsilon(1e-9));
    CHECK(r.lambda >= oracle - 1e-12);  // sampling can only underestimate the max of Q
  }
}

TEST_CASE("grid refinement changes the margin by less than 1e-3") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 4; ++trial) {
    const auto s = random_stable(rng, 2);
    for (double p : {2.0, 3.0, 5.0}) {
      SphereSampling coarse, fine;
      coarse.resolution = 64;
      coarse.random_probes = 0;
      fine.resolution = 128;
      fine.random_probes = 0;
      const double a = assumption_margin(s, p, coarse).lambda;
      const double b = assumption_margin(s, p, fine).lambda;
      CHECK(std::fabs(a - b) <= 1e-3 * std::fabs(b));
      CHECK(assumption_margin(s, p, fine).method == LyapunovMethod::sphere_grid);
    }
  }
}

TEST_CASE("generator inequality at 1000 random points") {
  std::mt19937_64 rng(13);
  for (int d : {1, 2, 3}) {
    const auto s = random_stable(rng, d);
    for (double p : {2.0, 3.0, 4.5}) {
      const double lambda = assumption_margin(s, p).lambda;
      for (int i = 0; i < 1000; ++i) {
        const Vec y = random_point(rng, d, 0.1 + 3.0 * (i % 10) / 10.0);
        CHECK(generator_value(s, p, y) <= -(lambda * p / 2.0) * std::pow(y.norm(), p) + 1e-10);
      }
    }
  }
}

TEST_CASE("generator examples") {
  const auto s = make_scalar_linear_system<double>(-1, 0.5, 0, 0);
  CHECK(generator_value(s, 2.0, Vec::Ones(1)) == doctest::Approx(-1.75).epsilon(1e-15));

  std::mt19937_64 rng(2);
  const Mat A = random_matrix(rng, 2, 1.0), Z = Mat::Zero(2, 2);
  const auto drift_only = make_linear_system<double>(A, {Z}, Z, {Z});
  Vec y(2);
  y << 0.3, -0.7;
  CHECK(generator_value(drift_only, 2.0, y) == doctest::Approx(2.0 * y.dot(A * y)).epsilon(1e-14));

  const auto r = random_stable(rng, 2);
  for (double p : {2.0, 3.5}) {
    const double s3 = 3.0;
    CHECK(generator_value(r, p, Vec(s3 * y)) ==
          doctest::Approx(std::pow(s3, p) * generator_value(r, p, y)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(generator_value(r, 3.0, Vec::Zero(2)), DomainError);
  CHECK(generator_value(r, 4.0, Vec::Zero(2)) == 0.0);
  CHECK_THROWS_AS(generator_value(r, 1.0, y), DomainError);
}

TEST_CASE("decay bound is tight for scalar GBM") {
  CHECK(lyapunov_decay_bound(1.75, 2.0, Vec::Ones(1), 2.0) == doctest::Approx(std::exp(-3.5)).epsilon(1e-15));
  Vec x0(2);
  x0 << 3, 4;
  CHECK(lyapunov_decay_bound(1.75, 2.0, x0, 0.0) == doctest::Approx(25.0));
  CHECK_THROWS_AS(lyapunov_decay_bound(0.0, 2.0, x0, 1.0), NoCertificateError);
  CHECK_THROWS_AS(lyapunov_decay_bound(-1.0, 2.0, x0, 1.0), NoCertificateError);
  CHECK_THROWS_AS(lyapunov_decay_bound(1.0, 2.0, x0, -1.0), DomainError);

  for (double p : {2.0, 3.0, 4.0}) {
    for (auto [a, b] : {std::pair{-1.0, 0.5}, {-2.0, 0.3}, {-0.5, 0.2}}) {
      const auto s = make_scalar_linear_system<double>(a, b, 0, 0);
      const double lambda = assumption_margin(s, p).lambda;
      CHECK(lambda * p / 2.0 == doctest::Approx(-exact::gbm_log_moment_rate(a, b, p)).epsilon(1e-14));
    }
  }
}

TEST_CASE("decay bound dominates the simulated moment") {
  const auto s = make_scalar_linear_system<double>(-1, 0.5, 0, 0);
  GridSpec g(0.1, 10, 2.0);
  MonteCarloConfig mc;
  mc.n_paths = 4000;
  mc.seed = 3;
  const auto series = estimate_pth_moment(s, Scheme::exact_gbm, Vec::Ones(1), g, mc);
  const double lambda = assumption_margin(s, 2.0).lambda;
  for (std::size_t i = 0; i < series.size(); ++i) {
    CHECK(series.values[i] - 3.0 * series.half_widths[i] <=
          lyapunov_decay_bound(lambda, 2.0, Vec::Ones(1), series.times[i]) * (1 + 1e-12));
  }
}

TEST_CASE("unsupported and invalid inputs") {
  const auto nl = make_scalar_nonlinear_system<double>({CatalogueShape::sine, -1}, {}, {}, {});
  CHECK_THROWS_AS(assumption_margin(nl, 2.0), UnsupportedError);
  const auto s = make_scalar_linear_system<double>(-1, 0.5, 0, 0);
  CHECK_THROWS_AS(assumption_margin(s, 1.9), DomainError);
  CHECK_THROWS_AS(assumption_form(s, 2.0, Vec::Ones(2)), ShapeError);
}
