#include <doctest.h>

#include <cmath>

#include "sdepca/errors.hpp"
#include "sdepca/paths.hpp"

using namespace sdepca;

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("inverse normal CDF reference values") {
  CHECK(inverse_normal_cdf(0.5) == 0.0);
  CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-15));
  CHECK(inverse_normal_cdf(0.995) == doctest::Approx(2.5758293035489004).epsilon(1e-15));
  CHECK(inverse_normal_cdf(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-14));
  CHECK(std::isfinite(inverse_normal_cdf(1e-300)));
  for (double u : {1e-8, 0.01, 0.3, 0.7, 0.99, 1 - 1e-12}) {
    CHECK(inverse_normal_cdf(u) == doctest::Approx(-inverse_normal_cdf(1 - u)).epsilon(1e-9));
    // Round trip through the normal CDF.
    CHECK(0.5 * std::erfc(-inverse_normal_cdf(u) / std::sqrt(2.0)) == doctest::Approx(u).epsilon(1e-12));
  }
}

TEST_CASE("uniforms stay inside the open unit interval") {
  CHECK(bits_to_open_unit(0) > 0.0);
  CHECK(bits_to_open_unit(~std::uint64_t{0}) < 1.0);
}

TEST_CASE("empty plan gives an empty table") {
  auto t = generate_increments({1, 0, 0, 0.1, 2});
  CHECK(t.rows() == 0);
  CHECK(t.cols() == 2);
}

TEST_CASE("determinism and addressing") {
  const IncrementPlan plan{42, 0, 100, 0.01, 3};
  const auto a = generate_increments(plan);
  const auto b = generate_increments(plan);
  CHECK(a == b);
  // Entry (n, j) depends only on its address, not on the table size.
  const auto longer = generate_increments({42, 0, 250, 0.01, 3});
  CHECK(longer.topRows(100) == a);
  CHECK(a(17, 2) == counter_normal(42, 0, 17 * 3 + 2) * std::sqrt(0.01));
  // Different paths and seeds differ.
  CHECK(generate_increments({42, 1, 100, 0.01, 3}) != a);
  CHECK(generate_increments({43, 0, 100, 0.01, 3}) != a);
}

TEST_CASE("validation") {
  CHECK_THROWS_AS(generate_increments({0, 0, 10, 0.0, 1}), ValidationError);
  CHECK_THROWS_AS(generate_increments({0, 0, 10, -1.0, 1}), ValidationError);
  CHECK_THROWS_AS(generate_increments({0, 0, -1, 0.1, 1}), ValidationError);
  CHECK_THROWS_AS(generate_increments({0, 0, 10, 0.1, 0}), ValidationError);
  CHECK_THROWS_AS(aggregate_increments(IncrementTable::Zero(5, 1), 2), ValidationError);
  CHECK_THROWS_AS(aggregate_increments(IncrementTable::Zero(4, 1), 0), ValidationError);
}

TEST_CASE("aggregation") {
  IncrementTable fine(4, 1);
  fine << 0.1, -0.2, 0.3, 0.4;
  const auto coarse = aggregate_increments(fine, 2);
  REQUIRE(coarse.rows() == 2);
  CHECK(coarse(0, 0) == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(coarse(1, 0) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(aggregate_increments(fine, 1) == fine);

  const auto big = generate_increments({9, 3, 48, 0.5, 2});
  const auto twice = aggregate_increments(aggregate_increments(big, 2), 3);
  const auto once = aggregate_increments(big, 6);
  CHECK((twice - once).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("per-step variance within the chi-square bound over 1e5 paths") {
  const std::int64_t n_paths = 100000;
  const double h = 0.01;
  const int steps = 4;
  std::vector<double> sum(steps, 0.0), sum_sq(steps, 0.0);
  std::vector<double> agg_sq(1, 0.0);
  double pooled_m3 = 0.0, pooled_m4 = 0.0;
  for (std::int64_t p = 0; p < n_paths; ++p) {
    const auto t = generate_increments({2024, static_cast<std::uint64_t>(p), steps, h, 1});
    for (int n = 0; n < steps; ++n) {
      sum[n] += t(n, 0);
      sum_sq[n] += t(n, 0) * t(n, 0);
      const double z = t(n, 0) / std::sqrt(h);
      pooled_m3 += z * z * z;
      pooled_m4 += z * z * z * z;
    }
    const double a = aggregate_increments(t, 4)(0, 0);
    agg_sq[0] += a * a;
  }
  const double N = static_cast<double>(n_paths);
  for (int n = 0; n < steps; ++n) {
    const double mean = sum[n] / N;
    const double var = sum_sq[n] / N - mean * mean;
    CHECK(std::fabs(var - h) <= 3.0 * std::sqrt(2.0 / N) * h);
    CHECK(std::fabs(mean) <= 3.0 * std::sqrt(h / N) * 1.5);
  }
  // Sum of r = 4 independent N(0, h) has variance 4h.
  CHECK(std::fabs(agg_sq[0] / N - 4 * h) <= 3.0 * std::sqrt(2.0 / N) * 4 * h);
  // Skewness 0 (sd sqrt(6/n)) and kurtosis 3 (sd sqrt(96/n)) for pooled draws.
  const double total = N * steps;
  CHECK(std::fabs(pooled_m3 / total) <= 4.0 * std::sqrt(15.0 / total));
  CHECK(std::fabs(pooled_m4 / total - 3.0) <= 4.0 * std::sqrt(96.0 / total));
}
