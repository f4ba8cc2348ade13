#pragma once

// Experiment configuration: a flat key = value text file with [section]
// headers. '#' starts a comment. Matrices are bracketed row lists, and the
// B and D families are lists of matrices:
//
//   command = simulate
//
//   [system]
//   kind = linear
//   A = [[-1]]
//   B = [[[0.5]]]
//   C = [[0.2]]
//   D = [[[0.1]]]
//
//   [grid]
//   tau = 0.1
//   m_sub = 10
//   horizon = 2
//
// Catalogue systems use kind = scalar-nonlinear and f = sin 0.5 style maps.
// serialize_config writes every key of every section in a fixed order, so
// parse(serialize(c)) serializes back to the same text.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sdepca/certificates.hpp"
#include "sdepca/integrators.hpp"
#include "sdepca/model.hpp"

namespace sdepca {

enum class Command { simulate, certify, threshold, convergence, lyapunov, chain };

std::string_view to_string(Command c);
Command parse_command(std::string_view name);

struct SystemConfig {
  SystemKind kind = SystemKind::linear;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(1, 1);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(1, 1);
  std::vector<Eigen::MatrixXd> B{Eigen::MatrixXd::Zero(1, 1)};
  std::vector<Eigen::MatrixXd> D{Eigen::MatrixXd::Zero(1, 1)};
  CatalogueMap<double> f, g, u1, u2;

  System build() const;
};

struct GridConfig {
  double tau = 0.1;
  std::int64_t m_sub = 10;
  double horizon = 1.0;
};

struct McConfig {
  std::int64_t n_paths = 1000;
  std::uint64_t seed = 0;
  double p = 2.0;
  std::vector<Scheme> schemes{Scheme::em_sde, Scheme::em_sdepca};
  /// Initial state; empty means all ones.
  std::vector<double> x0;
  /// Trajectories of the first dump_paths paths are written per scheme.
  std::int64_t dump_paths = 0;
  /// Also fit a decay pair to each simulated series.
  bool fit = false;
};

struct CertificateConfig {
  CertificateKind kind = CertificateKind::Q1;
  double delta = 0.5;
  /// Q1/Q3: search the best delta on a grid in (0, 1) instead.
  bool delta_search = false;
  /// Assumed decay pair of the source system. The chain command falls back
  /// to the Lyapunov pair when unset.
  std::optional<double> assumed_M;
  std::optional<double> assumed_gamma;
  /// Overrides the Lipschitz constant computed from the system.
  std::optional<double> K;
};

struct ThresholdConfig {
  std::vector<CertificateKind> kinds{CertificateKind::Q1, CertificateKind::Q2, CertificateKind::Q3,
                                     CertificateKind::Q4};
  /// Empty means {mc.p}.
  std::vector<double> p_values;
};

struct ConvergenceConfig {
  int coarsest_level = 4;
  int finest_level = 9;
};

struct LyapunovConfig {
  int resolution = 128;
  std::int64_t random_probes = 10000;
  std::uint64_t seed = 0;
};

struct OutputConfig {
  std::string dir = "out";
};

struct ExperimentConfig {
  Command command = Command::simulate;
  SystemConfig system;
  GridConfig grid;
  McConfig mc;
  CertificateConfig certificate;
  ThresholdConfig threshold;
  ConvergenceConfig convergence;
  LyapunovConfig lyapunov;
  OutputConfig output;

  Eigen::VectorXd initial_state(Eigen::Index d) const;
};

/// Throws ValidationError with the offending line number on malformed input.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& config);

/// Checks every numeric field against the owning module's preconditions and
/// builds the system. Throws the module's error on the first violation.
void validate_config(const ExperimentConfig& config);

/// 64-bit FNV-1a of the bytes, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace sdepca
