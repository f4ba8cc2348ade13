#include "sdepca/paths.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "sdepca/errors.hpp"

namespace sdepca {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(prod >> 32);
  lo = static_cast<std::uint32_t>(prod);
}

double polynomial(const double* coef, int n, double x) {
  double acc = coef[n - 1];
  for (int i = n - 2; i >= 0; --i) acc = acc * x + coef[i];
  return acc;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

double inverse_normal_cdf(double u) {
  // AS241 PPND16 coefficients, lowest order first.
  static constexpr double a[8] = {3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
                                  1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
                                  3.3430575583588128105e4, 2.5090809287301226727e3};
  static constexpr double b[8] = {1.0,
                                  4.2313330701600911252e1,
                                  6.8718700749205790830e2,
                                  5.3941960214247511077e3,
                                  2.1213794301586595867e4,
                                  3.9307895800092710610e4,
                                  2.8729085735721942674e4,
                                  5.2264952788528545610e3};
  static constexpr double c[8] = {1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
                                  3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
                                  2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static constexpr double d[8] = {1.0,
                                  2.05319162663775882187e0,
                                  1.67638483018380384940e0,
                                  6.89767334985100004550e-1,
                                  1.48103976427480074590e-1,
                                  1.51986665636164571966e-2,
                                  5.47593808499534494600e-4,
                                  1.05075007164441684324e-9};
  static constexpr double e[8] = {6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
                                  2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
                                  2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr double f[8] = {1.0,
                                  5.99832206555887937690e-1,
                                  1.36929880922735805310e-1,
                                  1.48753612908506148525e-2,
                                  7.86869131145613259100e-4,
                                  1.84631831751005468180e-5,
                                  1.42151175831644588870e-7,
                                  2.04426310338993978564e-15};

  if (!(u > 0.0 && u < 1.0)) {
    if (u == 0.0) return -std::numeric_limits<double>::infinity();
    if (u == 1.0) return std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double q = u - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * polynomial(a, 8, r) / polynomial(b, 8, r);
  }
  double r = q < 0.0 ? u : 1.0 - u;
  r = std::sqrt(-std::log(r));
  double z;
  if (r <= 5.0) {
    r -= 1.6;
    z = polynomial(c, 8, r) / polynomial(d, 8, r);
  } else {
    r -= 5.0;
    z = polynomial(e, 8, r) / polynomial(f, 8, r);
  }
  return q < 0.0 ? -z : z;
}

double counter_normal(std::uint64_t seed, std::uint64_t path_id, std::uint64_t index) {
  // One Philox block yields two normals: words (0,1) for even index, (2,3) for odd.
  const std::uint64_t block = index >> 1;
  const auto out = philox4x32({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                               static_cast<std::uint32_t>(path_id), static_cast<std::uint32_t>(path_id >> 32)},
                              {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  const std::size_t w = (index & 1u) ? 2 : 0;
  const std::uint64_t bits = (static_cast<std::uint64_t>(out[w]) << 32) | out[w + 1];
  return inverse_normal_cdf(bits_to_open_unit(bits));
}

void generate_increments_into(const IncrementPlan& plan, IncrementTable& out) {
  if (!(plan.h > 0.0) || !std::isfinite(plan.h)) throw ValidationError("increment step h must be positive");
  if (plan.n_steps < 0) throw ValidationError("n_steps must be nonnegative");
  if (plan.m_bm < 1) throw ValidationError("Brownian dimension must be positive");
  out.resize(plan.n_steps, plan.m_bm);
  const double scale = std::sqrt(plan.h);
  const auto m = static_cast<std::uint64_t>(plan.m_bm);
  for (std::int64_t n = 0; n < plan.n_steps; ++n) {
    for (std::int64_t j = 0; j < plan.m_bm; ++j) {
      const std::uint64_t index = static_cast<std::uint64_t>(n) * m + static_cast<std::uint64_t>(j);
      out(n, j) = scale * counter_normal(plan.seed, plan.path_id, index);
    }
  }
}

IncrementTable generate_increments(const IncrementPlan& plan) {
  IncrementTable out;
  generate_increments_into(plan, out);
  return out;
}

IncrementTable aggregate_increments(const IncrementTable& fine, std::int64_t refinement) {
  if (refinement < 1) throw ValidationError("refinement must be a positive integer");
  if (fine.rows() % refinement != 0) {
    throw ValidationError("fine table length " + std::to_string(fine.rows()) + " is not divisible by " +
                          std::to_string(refinement));
  }
  const Eigen::Index coarse_rows = fine.rows() / refinement;
  IncrementTable coarse = IncrementTable::Zero(coarse_rows, fine.cols());
  for (Eigen::Index j = 0; j < coarse_rows; ++j) {
    // Left-to-right summation keeps r = 1 an exact identity.
    for (Eigen::Index k = 0; k < refinement; ++k) coarse.row(j) += fine.row(j * refinement + k);
  }
  return coarse;
}

}  // namespace sdepca
