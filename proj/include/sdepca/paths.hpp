#pragma once

// Reproducible Brownian increments.
//
// Every increment is a pure function of (seed, path_id, step, component):
// a Philox-4x32-10 block keyed on the seed and countered on
// (step/component pair index, path_id) is turned into a uniform on (0, 1)
// with 52 random bits and mapped through the inverse normal CDF. No state is
// carried between draws, so results do not depend on evaluation order or on
// how paths are spread over threads.

#include <Eigen/Dense>

#include <array>
#include <cstdint>

namespace sdepca {

/// Table of increments, one row per step, one column per Brownian component.
using IncrementTable = Eigen::MatrixXd;

/// Philox-4x32 with 10 rounds (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Inverse of the standard normal CDF for u in (0, 1), Wichura's AS241
/// (relative accuracy about 1e-16).
double inverse_normal_cdf(double u);

/// Uniform on the open interval (0, 1) from 64 random bits. The top 52 are
/// used: with 53, the largest midpoint 1 - 2^-54 rounds to 1.
inline double bits_to_open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Standard normal variate addressed by (seed, path_id, index).
double counter_normal(std::uint64_t seed, std::uint64_t path_id, std::uint64_t index);

struct IncrementPlan {
  std::uint64_t seed = 0;
  std::uint64_t path_id = 0;
  std::int64_t n_steps = 0;
  double h = 0.0;
  std::int64_t m_bm = 1;
};

/// n_steps x m_bm table of independent N(0, h) increments.
IncrementTable generate_increments(const IncrementPlan& plan);

/// Fills a preallocated table; used in hot Monte-Carlo loops.
void generate_increments_into(const IncrementPlan& plan, IncrementTable& out);

/// Coarse step j is the sum of fine steps j*r .. (j+1)*r - 1.
IncrementTable aggregate_increments(const IncrementTable& fine, std::int64_t refinement);

}  // namespace sdepca
