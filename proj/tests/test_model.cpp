#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <random>

#include "sdepca/model.hpp"

using namespace sdepca;
using Mat = Eigen::MatrixXd;

namespace {

// Independent oracle: sqrt of the largest eigenvalue of M'M.
double spectral_norm_oracle(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m.transpose() * m);
  return std::sqrt(es.eigenvalues().maxCoeff());
}

double lipschitz_oracle(const Mat& A, const std::vector<Mat>& B, const Mat& C, const std::vector<Mat>& D) {
  double sb = 0.0, sd = 0.0;
  for (const auto& b : B) sb += std::pow(spectral_norm_oracle(b), 2);
  for (const auto& d : D) sd += std::pow(spectral_norm_oracle(d), 2);
  return std::max({spectral_norm_oracle(A), spectral_norm_oracle(C), std::sqrt(sb), std::sqrt(sd)});
}

Mat random_matrix(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> n;
  Mat m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = n(rng);
  return m;
}

}  // namespace

TEST_CASE("scalar system K read off the coefficients") {
  auto s = make_scalar_linear_system<double>(-1, 0.5, 0, 0);
  CHECK(s.lipschitz() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.dim() == 1);
  CHECK(s.brownian_dim() == 1);
  CHECK(make_scalar_linear_system<double>(-1, 0.5, 0.2, 0.1).lipschitz() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("zero system in two dimensions has K = 0") {
  const Mat z = Mat::Zero(2, 2);
  auto s = make_linear_system<double>(z, {z}, z, {z});
  CHECK(s.lipschitz() == 0.0);
  auto c = eval_coefficients(s, Eigen::VectorXd::Constant(2, 3.0), Eigen::VectorXd::Constant(2, -1.0));
  CHECK(c.drift.isZero(0.0));
  CHECK(c.diffusion.isZero(0.0));
}

TEST_CASE("diagonal 2-D example has K = 2") {
  Mat A(2, 2), B(2, 2), C(2, 2);
  A << -1, 0, 0, -2;
  B << 0.3, 0, 0, 0.3;
  C << 0.1, 0, 0, 0.1;
  const Mat D = Mat::Zero(2, 2);
  auto s = make_linear_system<double>(A, {B}, C, {D});
  CHECK(s.lipschitz() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(s.lipschitz() == doctest::Approx(lipschitz_oracle(A, {B}, C, {D})).epsilon(1e-14));
}

TEST_CASE("lipschitz_bound matches the eigenvalue oracle on random systems") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 4;
    const int m = 1 + trial % 3;
    std::vector<Mat> B, D;
    for (int i = 0; i < m; ++i) {
      B.push_back(random_matrix(rng, d));
      D.push_back(random_matrix(rng, d));
    }
    const Mat A = random_matrix(rng, d), C = random_matrix(rng, d);
    auto s = make_linear_system<double>(A, B, C, D);
    CHECK(s.lipschitz() == doctest::Approx(lipschitz_oracle(A, B, C, D)).epsilon(1e-10));
  }
}

TEST_CASE("eval_coefficients hand examples") {
  auto s = make_scalar_linear_system<double>(-1, 0.5, 0.2, 0.1);
  Eigen::VectorXd x(1), xd(1);
  x << 2;
  xd << 1;
  auto c = eval_coefficients(s, x, xd);
  CHECK(c.drift(0) == doctest::Approx(-1.8).epsilon(1e-15));
  CHECK(c.diffusion(0, 0) == doctest::Approx(1.1).epsilon(1e-15));
  x << 1;
  c = eval_coefficients(s, x, x);
  CHECK(c.drift(0) == doctest::Approx(-0.8).epsilon(1e-15));
  CHECK(c.diffusion(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("maps vanish at the origin") {
  std::mt19937_64 rng(3);
  auto s = make_linear_system<double>(random_matrix(rng, 3), {random_matrix(rng, 3), random_matrix(rng, 3)},
                                      random_matrix(rng, 3), {random_matrix(rng, 3), random_matrix(rng, 3)});
  auto c = eval_coefficients(s, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3));
  CHECK(c.drift.norm() <= 1e-14);
  CHECK(c.diffusion.norm() <= 1e-14);
  auto n = make_scalar_nonlinear_system<double>({CatalogueShape::sine, 0.7}, {CatalogueShape::tanh, -0.4},
                                                {CatalogueShape::tanh, 0.2}, {CatalogueShape::sine, 0.1});
  auto cn = eval_coefficients(n, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1));
  CHECK(std::fabs(cn.drift(0)) <= 1e-14);
  CHECK(std::fabs(cn.diffusion(0, 0)) <= 1e-14);
  CHECK(n.lipschitz() == doctest::Approx(0.7));
}

TEST_CASE("K-Lipschitz on 1000 random pairs in the radius-10 ball") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 1 + trial % 3;
    auto s = make_linear_system<double>(random_matrix(rng, d), {random_matrix(rng, d)}, random_matrix(rng, d),
                                        {random_matrix(rng, d)});
    CHECK(max_lipschitz_ratio(s, 1000, 10.0, 100 + trial) <= s.lipschitz() * (1 + 1e-12));
  }
  auto n = make_scalar_nonlinear_system<double>({CatalogueShape::sine, -1.5}, {CatalogueShape::tanh, 0.8},
                                                {CatalogueShape::sine, 0.3}, {CatalogueShape::tanh, 0.2});
  CHECK(max_lipschitz_ratio(n, 1000, 10.0, 5) <= n.lipschitz());
}

TEST_CASE("homogeneity of linear coefficients") {
  std::mt19937_64 rng(5);
  auto s = make_linear_system<double>(random_matrix(rng, 2), {random_matrix(rng, 2), random_matrix(rng, 2)},
                                      random_matrix(rng, 2), {random_matrix(rng, 2), random_matrix(rng, 2)});
  Eigen::VectorXd x(2), xd(2);
  x << 0.3, -1.2;
  xd << 2.0, 0.7;
  const double k = -2.5;
  auto a = eval_coefficients(s, Eigen::VectorXd(k * x), Eigen::VectorXd(k * xd));
  auto b = eval_coefficients(s, x, xd);
  CHECK((a.drift - k * b.drift).norm() <= 1e-13);
  CHECK((a.diffusion - k * b.diffusion).norm() <= 1e-13);
}

TEST_CASE("shape and value validation") {
  const Mat one = Mat::Ones(1, 1), two = Mat::Zero(2, 2);
  CHECK_THROWS_AS(make_linear_system<double>(two, {one}, two, {two}), ShapeError);
  CHECK_THROWS_AS(make_linear_system<double>(two, {two}, two, {}), ShapeError);
  CHECK_THROWS_AS(make_linear_system<double>(Mat::Zero(2, 3), {two}, two, {two}), ShapeError);
  Mat bad = one;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(make_linear_system<double>(bad, {one}, one, {one}), ValidationError);
  auto s = make_scalar_linear_system<double>(-1, 0, 0, 0);
  CHECK_THROWS_AS(eval_coefficients(s, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1)), ShapeError);
  CHECK_THROWS_AS(parse_catalogue_shape("cos"), ValidationError);
}

TEST_CASE("GridSpec block decomposition") {
  GridSpec g(0.1, 10, 2.0);
  CHECK(g.n_blocks() == 20);
  CHECK(g.n_steps() == 200);
  CHECK(g.h() * 10 == doctest::Approx(0.1).epsilon(1e-15));
  for (std::int64_t n = 0; n <= g.n_steps(); ++n) {
    CHECK(g.block(n) * g.m_sub() + g.offset(n) == n);
    CHECK(g.offset(n) < g.m_sub());
  }
  GridSpec r(0.3, 3, 1.0);  // rounded up to 4 blocks
  CHECK(r.n_blocks() == 4);
  CHECK(r.end_time() == doctest::Approx(1.2));
  CHECK_THROWS_AS(GridSpec(0.0, 1, 1.0), ValidationError);
  CHECK_THROWS_AS(GridSpec(0.1, 0, 1.0), ValidationError);
  CHECK_THROWS_AS(GridSpec(0.1, 1, -1.0), ValidationError);
}
