#include <doctest.h>

#include <cstring>
#include <random>

#include "sdepca/integrators.hpp"
#include "sdepca/paths.hpp"

using namespace sdepca;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace {

Vec vec1(double x) { return Vec::Constant(1, x); }

bool bitwise_equal(const Mat& a, const Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

Mat random_matrix(std::mt19937_64& rng, int d, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Mat m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = n(rng);
  return m;
}

}  // namespace

TEST_CASE("zero initial state stays at the origin for every scheme") {
  auto s = make_scalar_linear_system<double>(-1, 0.5, 0.2, 0.1);
  GridSpec g(0.1, 5, 1.0);
  const auto inc = generate_increments({1, 0, g.n_steps(), g.h(), 1});
  CHECK(em_sde_path(s, vec1(0), g, inc).states.isZero(0.0));
  CHECK(em_sdepca_path(s, vec1(0), g, inc).states.isZero(0.0));
  CHECK(gbm_exact_path(-0.8, 0.6, 0.0, g, inc).states.isZero(0.0));
}

TEST_CASE("one EM step by hand") {
  auto s = make_scalar_linear_system<double>(-1, 0.5, 0, 0);
  GridSpec g(0.1, 1, 0.1);
  IncrementTable inc(1, 1);
  inc << 0.2;
  const auto t = em_sde_path(s, vec1(1), g, inc);
  CHECK(t.states(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(t.states(0, 0) == 1.0);
  CHECK(t.size() == 2);
}

TEST_CASE("noise-free EM matches the deterministic Euler formula") {
  auto s = make_scalar_linear_system<double>(-1, 0, 0, 0);
  GridSpec g(0.05, 1, 2.0);
  const auto t = em_sde_path(s, vec1(1), g, IncrementTable::Zero(g.n_steps(), 1));
  for (std::int64_t n = 0; n <= g.n_steps(); ++n) {
    CHECK(t.states(0, n) == doctest::Approx(std::pow(1 - g.h(), static_cast<double>(n))).epsilon(1e-12));
  }
}

TEST_CASE("delayed argument is frozen within each block") {
  auto s = make_scalar_linear_system<double>(0, 0, -1, 0);
  GridSpec g(1.0, 2, 1.0);
  const auto t = em_sdepca_path(s, vec1(1), g, IncrementTable::Zero(2, 1));
  CHECK(t.states(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(t.states(0, 2) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("coincidences with em_sde_path are bitwise") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 1 + trial % 2;
    const int m = 1 + trial % 3;
    const Mat A = random_matrix(rng, d, 1.0), C = random_matrix(rng, d, 0.5);
    std::vector<Mat> B, D, Z;
    for (int i = 0; i < m; ++i) {
      B.push_back(random_matrix(rng, d, 0.3));
      D.push_back(random_matrix(rng, d, 0.2));
      Z.push_back(Mat::Zero(d, d));
    }
    const Vec x0 = Vec::LinSpaced(d, 1.0, 2.0);
    const auto full = make_linear_system<double>(A, B, C, D);
    const auto undelayed = make_linear_system<double>(A, B, Mat::Zero(d, d), Z);

    GridSpec g(0.2, 4, 2.0);
    const auto inc = generate_increments({5, static_cast<std::uint64_t>(trial), g.n_steps(), g.h(), m});
    CHECK(bitwise_equal(em_sdepca_path(undelayed, x0, g, inc).states, em_sde_path(undelayed, x0, g, inc).states));

    GridSpec g1(0.05, 1, 2.0);
    const auto inc1 = generate_increments({6, static_cast<std::uint64_t>(trial), g1.n_steps(), g1.h(), m});
    CHECK(bitwise_equal(em_sdepca_path(full, x0, g1, inc1).states, em_sde_path(full, x0, g1, inc1).states));
  }
}

TEST_CASE("linearity in the initial state") {
  std::mt19937_64 rng(4);
  const auto s = make_linear_system<double>(random_matrix(rng, 2, 1.0), {random_matrix(rng, 2, 0.3)},
                                            random_matrix(rng, 2, 0.3), {random_matrix(rng, 2, 0.3)});
  GridSpec g(0.1, 3, 1.0);
  const auto inc = generate_increments({8, 0, g.n_steps(), g.h(), 1});
  Vec x0(2);
  x0 << 0.4, -1.1;
  const double k = 3.0;
  for (bool delayed : {false, true}) {
    const auto a = delayed ? em_sdepca_path(s, Vec(k * x0), g, inc) : em_sde_path(s, Vec(k * x0), g, inc);
    const auto b = delayed ? em_sdepca_path(s, x0, g, inc) : em_sde_path(s, x0, g, inc);
    CHECK((a.states - k * b.states).cwiseAbs().maxCoeff() <= 1e-12 * (1 + b.states.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("exact GBM sampler") {
  GridSpec g(0.1, 2, 1.0);
  const auto inc = generate_increments({3, 0, g.n_steps(), g.h(), 1});
  const auto det = gbm_exact_path(-0.7, 0.0, 2.0, g, inc);
  for (std::int64_t n = 0; n <= g.n_steps(); ++n) {
    CHECK(det.states(0, n) == doctest::Approx(2.0 * std::exp(-0.7 * g.time(n))).epsilon(1e-14));
  }
  const auto flat = gbm_exact_path(0.0, 0.0, 3.0, g, inc);
  CHECK((flat.states.array() == 3.0).all());
  const auto t = gbm_exact_path(-1.0, 0.5, 1.0, g, inc);
  double w = 0.0;
  for (std::int64_t n = 0; n < g.n_steps(); ++n) w += inc(n, 0);
  CHECK(t.states(0, g.n_steps()) == doctest::Approx(std::exp(-1.125 * g.end_time() + 0.5 * w)).epsilon(1e-14));
  CHECK(t.scheme == Scheme::exact_gbm);
}

TEST_CASE("trajectory views") {
  auto s = make_scalar_linear_system<double>(-1, 0.5, 0, 0);
  GridSpec g(0.25, 2, 1.0);
  const auto t = em_sde_path(s, vec1(1), g, generate_increments({1, 0, g.n_steps(), g.h(), 1}));
  const auto times = t.times();
  REQUIRE(times.size() == 9);
  CHECK(times[4] == doctest::Approx(0.5));
  CHECK(t.at_time(0.6)(0) == t.states(0, 4));
  CHECK(t.at_time(5.0)(0) == t.states(0, 8));
}

TEST_CASE("divergence and shape errors") {
  auto s = make_scalar_linear_system<double>(50, 0, 0, 0);
  GridSpec g(0.1, 1, 10.0);
  try {
    em_sde_path(s, vec1(1), g, IncrementTable::Zero(g.n_steps(), 1));
    FAIL("expected divergence");
  } catch (const DivergedError& e) {
    // (1 + 5)^n exceeds 1e12 first at n = 16.
    CHECK(e.step() == 16);
  }
  CHECK_THROWS_AS(em_sdepca_path(s, vec1(1), g, IncrementTable::Zero(g.n_steps(), 1)), DivergedError);
  CHECK_THROWS_AS(em_sde_path(s, vec1(1), g, IncrementTable::Zero(3, 1)), ShapeError);
  CHECK_THROWS_AS(em_sde_path(s, Vec::Ones(2), g, IncrementTable::Zero(g.n_steps(), 1)), ShapeError);
  CHECK(parse_scheme("em-sdepca") == Scheme::em_sdepca);
  CHECK_THROWS_AS(parse_scheme("milstein"), ValidationError);
}
