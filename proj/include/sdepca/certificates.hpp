#pragma once

// Explicit stability-transfer constants and the four transfer conditions
// between the delayed SDE (SDEPCA), the SDE, and their Euler-Maruyama
// discretizations (EMSDEPCA, EMSDE):
//
//   Q1: SDEPCA  -> SDE       condition on tau
//   Q2: SDE     -> EMSDE     condition on h
//   Q3: EMSDE   -> EMSDEPCA  condition on tau
//   Q4: EMSDEPCA-> SDEPCA    condition on h
//
// The constants grow like exp(C3 T) and quickly leave double range, and the
// admissible tau, h can be smaller than the smallest positive double. All
// quantities are therefore carried as natural logarithms, including tau, h
// and the block count n_hat.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sdepca {

enum class CertificateKind { Q1, Q2, Q3, Q4, LYAP };

std::string_view to_string(CertificateKind kind);
CertificateKind parse_certificate_kind(std::string_view name);

/// Decay envelope E|.|^p <= M |x0|^p exp(-rate t), with M stored as log M.
struct DecayPair {
  double log_M = 0.0;
  double rate = 0.0;

  static DecayPair from_plain(double M, double rate) { return {std::log(M), rate}; }
  double M() const { return std::exp(log_M); }
};

struct ConstantTable {
  double p = 2.0, K = 0.0, tau = 0.0, T = 0.0;
  // log(0) = -inf encodes an exact zero (K = 0).
  double log_C1 = 0.0;
  double log_C2 = 0.0;
  double C3 = 0.0;
  double log_H1 = 0.0;
  double log_H3 = 0.0;
  double log_H4 = 0.0;
  double log_H6 = 0.0;
  double log_H7 = 0.0;
  double log_H8 = 0.0;
  double log_H9 = 0.0;
};

/// Every constant at (p, K, tau, T). Throws DomainError for p < 2, K < 0,
/// tau <= 0 or T <= 0.
ConstantTable constant_table(double p, double K, double tau, double T);

/// The individual constants, log domain. tau enters only through log tau.
namespace constants {
double log_C1(double p, double K, double log_tau);
double log_C2(double p, double K, double log_tau);
double C3(double p, double K);
/// 2pK(1 + (p-1)K): the exponential rate shared by H1, H3 and the Gronwall steps.
double moment_growth_rate(double p, double K);
double log_H1(double T, double p, double K);
double log_H3(double T, double p, double K);
double log_H4(double T, double K, double log_tau, double p);
double log_H6(double T, double p, double K);
double log_H7(double T, double K, double p);
double log_H8(double T, double K, double p);
double log_H9(double T, double p, double K);
}  // namespace constants

/// log(exp(a) + exp(b)) without overflow; -inf acts as log 0.
double log_add_exp(double a, double b);
/// log(exp(x) - 1) for x >= 0, exact for large x.
double log_expm1(double x);

struct CertificateParams {
  double p = 2.0;
  double K = 0.0;
  double log_tau = std::nan("");  // Q1, Q3, Q4
  double log_h = std::nan("");    // Q2, Q4
  double delta = std::nan("");    // Q1, Q3
  /// Decay pair assumed for the source system of the transfer.
  DecayPair assumed;

  CertificateParams& with_tau(double tau) {
    log_tau = std::log(tau);
    return *this;
  }
  CertificateParams& with_h(double h) {
    log_h = std::log(h);
    return *this;
  }
};

struct Certificate {
  CertificateKind kind = CertificateKind::Q1;
  CertificateParams inputs;
  bool pass = false;
  /// Decisive inequality lhs < rhs, both as logs.
  double lhs_log = 0.0;
  double rhs_log = 0.0;
  /// log n_hat for Q1, Q3, Q4. Exact integer below 2^52; beyond that the
  /// ceiling/floor adjustment is below double resolution and n_hat is the
  /// real quotient.
  std::optional<double> log_n_hat;
  /// n_hat * tau (Q1, Q3, Q4) or the horizon T (Q2).
  double block_horizon = 0.0;
  /// Pair certified for the target system. Present only on pass.
  std::optional<DecayPair> implied;
};

/// Evaluates the transfer condition of `kind` and, on pass, the implied pair
/// taken at the inequality boundary.
Certificate check_certificate(CertificateKind kind, const CertificateParams& params);

struct Threshold {
  CertificateKind kind = CertificateKind::Q1;
  /// log tau* (Q1, Q3) or log h* (Q2, Q4). +inf when every value passes.
  double log_value = 0.0;
  /// Q4 only: the smallest m with tau / m <= h*, when it fits in 62 bits.
  std::optional<std::uint64_t> min_substeps;
  double log_min_substeps = std::nan("");

  double value() const { return std::exp(log_value); }
};

/// Largest tau (Q1, Q3) or h (Q2, Q4) below which the condition holds.
/// Q1/Q3 scan for monotonicity then bisect in log tau; Q2/Q4 are closed form.
Threshold solve_threshold(CertificateKind kind, const CertificateParams& params);

/// Same threshold found purely by bracketing and bisection on
/// check_certificate, for every kind. Used to cross-check the closed forms.
Threshold solve_threshold_by_bisection(CertificateKind kind, const CertificateParams& params);

/// Evaluates Q1/Q3 over a grid of delta values and returns the certificate
/// with the smallest lhs (the best margin).
Certificate best_delta_certificate(CertificateKind kind, const CertificateParams& params,
                                   const std::vector<double>& deltas);

/// Result of composing Q2 -> Q3 -> Q4 -> Q1 from a decay pair of the SDE.
struct ChainResult {
  double log_tau = 0.0;
  double log_h = 0.0;
  /// In order Q2, Q3, Q4, Q1.
  std::vector<Certificate> certificates;
  bool all_pass() const {
    for (const auto& c : certificates) {
      if (!c.pass) return false;
    }
    return !certificates.empty();
  }
};

/// Picks tau and h from the threshold solvers (half of each admissible bound,
/// h = tau / m with m >= 2) and runs the full cycle, shrinking tau until the
/// closing Q1 step passes. Throws NoCertificateError if no such tau is found.
ChainResult certify_chain(double p, double K, double delta, const DecayPair& sde_pair);

}  // namespace sdepca
