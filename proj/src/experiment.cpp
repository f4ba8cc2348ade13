#include "sdepca/experiment.hpp"

#include <json.hpp>

#include <fstream>

#include "sdepca/certificates.hpp"
#include "sdepca/convergence.hpp"
#include "sdepca/errors.hpp"
#include "sdepca/lyapunov.hpp"
#include "sdepca/moments.hpp"
#include "sdepca/paths.hpp"
#include "sdepca/report.hpp"

namespace sdepca {

namespace {

class Run {
 public:
  Run(const ExperimentConfig& config, const RunOptions& options)
      : config_(config), options_(options), system_(config.system.build()) {
    bundle_.directory = config.output.dir;
    std::error_code ec;
    std::filesystem::create_directories(bundle_.directory, ec);
    if (ec) throw IoError("cannot create output directory " + config.output.dir + ": " + ec.message());
    bundle_.config_hash = fnv1a_hex(serialize_config(config));
  }

  ReportBundle execute() {
    switch (config_.command) {
      case Command::simulate: simulate(); break;
      case Command::certify: certify(); break;
      case Command::threshold: threshold(); break;
      case Command::convergence: convergence(); break;
      case Command::lyapunov: lyapunov(); break;
      case Command::chain: chain(); break;
    }
    write_manifest();
    if (diverged_) throw DivergedError(static_cast<std::size_t>(*diverged_), "a simulated path diverged");
    return bundle_;
  }

 private:
  void emit(const std::vector<CsvRow>& rows, const CsvSchema& schema, const std::string& name) {
    const auto path = bundle_.directory / name;
    emit_report(rows, schema, path);
    bundle_.files.push_back(path);
  }

  double K() const { return config_.certificate.K.value_or(system_.lipschitz()); }

  CertificateParams params(double p) const {
    CertificateParams in;
    in.p = p;
    in.K = K();
    in.delta = config_.certificate.delta;
    in.with_tau(config_.grid.tau);
    in.log_h = in.log_tau - std::log(static_cast<double>(config_.grid.m_sub));
    if (config_.certificate.assumed_M) {
      in.assumed = DecayPair::from_plain(*config_.certificate.assumed_M, *config_.certificate.assumed_gamma);
    }
    return in;
  }

  DecayPair require_assumed() const {
    if (!config_.certificate.assumed_M) {
      throw ValidationError("certificate.assumed_M and assumed_gamma are required for this command");
    }
    return DecayPair::from_plain(*config_.certificate.assumed_M, *config_.certificate.assumed_gamma);
  }

  LyapunovReport margin(double p) const {
    SphereSampling s;
    s.resolution = config_.lyapunov.resolution;
    s.random_probes = config_.lyapunov.random_probes;
    s.seed = config_.lyapunov.seed;
    return assumption_margin(system_, p, s);
  }

  void simulate() {
    const GridSpec grid(config_.grid.tau, config_.grid.m_sub, config_.grid.horizon);
    const Eigen::VectorXd x0 = config_.initial_state(system_.dim());
    MonteCarloConfig mc;
    mc.p = config_.mc.p;
    mc.n_paths = config_.mc.n_paths;
    mc.seed = config_.mc.seed;
    mc.threads = options_.threads;
    std::vector<CsvRow> fits;
    for (Scheme scheme : config_.mc.schemes) {
      const MomentSeries series = estimate_pth_moment(system_, scheme, x0, grid, mc);
      const std::string tag(to_string(scheme));
      emit(moment_rows(series), schemas::moment_series(), "moments_" + tag + ".csv");
      if (series.unstable_from && (!diverged_ || *series.unstable_from < *diverged_)) diverged_ = series.unstable_from;
      if (config_.mc.dump_paths > 0) dump(scheme, grid, x0, tag);
      if (config_.mc.fit && !series.unstable_from) fits.push_back(decay_fit_row(scheme, fit_decay_rate(series)));
    }
    if (config_.mc.fit) emit(fits, schemas::decay_fit(), "decay_fit.csv");
    // Exact second-moment oracles for scalar linear systems.
    if (system_.is_linear() && system_.is_scalar() && config_.mc.p == 2.0) {
      const ScalarLinear coef = scalar_coefficients(system_);
      const double x = x0(0);
      emit(moment_rows(em_linear_second_moment(MomentKind::sde, coef, grid, x)), schemas::moment_series(),
           "exact_em-sde.csv");
      emit(moment_rows(em_linear_second_moment(MomentKind::sdepca, coef, grid, x)), schemas::moment_series(),
           "exact_em-sdepca.csv");
      emit(moment_rows(sdepca_exact_second_moment(coef, grid, x)), schemas::moment_series(), "exact_sdepca.csv");
    }
  }

  void dump(Scheme scheme, const GridSpec& grid, const Eigen::VectorXd& x0, const std::string& tag) {
    std::vector<CsvRow> rows;
    for (std::int64_t path = 0; path < config_.mc.dump_paths; ++path) {
      const auto inc = generate_increments({config_.mc.seed, static_cast<std::uint64_t>(path), grid.n_steps(),
                                            grid.h(), system_.brownian_dim()});
      std::optional<Trajectory<double>> traj;
      try {
        switch (scheme) {
          case Scheme::em_sde: traj = em_sde_path(system_, x0, grid, inc); break;
          case Scheme::em_sdepca: traj = em_sdepca_path(system_, x0, grid, inc); break;
          case Scheme::exact_gbm: {
            const ScalarLinear coef = scalar_coefficients(system_);
            traj = gbm_exact_path(coef.alpha(), coef.beta(), x0(0), grid, inc);
            break;
          }
        }
      } catch (const DivergedError&) {
        continue;  // the moment series already records the divergence
      }
      auto r = trajectory_rows(static_cast<std::uint64_t>(path), *traj);
      rows.insert(rows.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
    }
    emit(rows, schemas::trajectory(), "trajectories_" + tag + ".csv");
  }

  void certify() {
    const auto kind = config_.certificate.kind;
    CertificateParams in = params(config_.mc.p);
    in.assumed = require_assumed();
    Certificate cert;
    if (config_.certificate.delta_search && (kind == CertificateKind::Q1 || kind == CertificateKind::Q3)) {
      std::vector<double> deltas;
      for (int i = 1; i < 100; ++i) deltas.push_back(i / 100.0);
      cert = best_delta_certificate(kind, in, deltas);
    } else {
      cert = check_certificate(kind, in);
    }
    emit({certificate_row(cert)}, schemas::certificate(), "certificates.csv");
  }

  void threshold() {
    std::vector<double> ps = config_.threshold.p_values;
    if (ps.empty()) ps.push_back(config_.mc.p);
    const DecayPair assumed = require_assumed();
    std::vector<CsvRow> rows;
    for (double p : ps) {
      for (CertificateKind kind : config_.threshold.kinds) {
        CertificateParams in = params(p);
        in.assumed = assumed;
        rows.push_back(threshold_row(solve_threshold(kind, in), in));
      }
    }
    emit(rows, schemas::threshold(), "thresholds.csv");
  }

  void convergence() {
    StrongErrorConfig sc;
    sc.p = config_.mc.p;
    sc.horizon = config_.grid.horizon;
    sc.coarsest_level = config_.convergence.coarsest_level;
    sc.finest_level = config_.convergence.finest_level;
    sc.n_paths = config_.mc.n_paths;
    sc.seed = config_.mc.seed;
    sc.threads = options_.threads;
    const Eigen::VectorXd x0 = config_.initial_state(system_.dim());
    emit(strong_error_rows(strong_error_study(system_, x0(0), sc)), schemas::strong_error(), "convergence.csv");
  }

  void lyapunov() {
    const LyapunovReport report = margin(config_.mc.p);
    emit({lyapunov_certificate_row(report, K())}, schemas::certificate(), "certificates.csv");
    emit({lyapunov_row(report)}, schemas::lyapunov(), "lyapunov.csv");
  }

  void chain() {
    const double p = config_.mc.p;
    std::vector<CsvRow> rows;
    DecayPair start;
    if (config_.certificate.assumed_M) {
      start = require_assumed();
    } else {
      const LyapunovReport report = margin(p);
      rows.push_back(lyapunov_certificate_row(report, K()));
      emit({lyapunov_row(report)}, schemas::lyapunov(), "lyapunov.csv");
      if (!(report.lambda > 0.0)) {
        emit(rows, schemas::certificate(), "certificates.csv");
        throw NoCertificateError("Lyapunov margin is not positive; the chain has no starting pair");
      }
      start = report.decay_pair();
    }
    const ChainResult result = certify_chain(p, K(), config_.certificate.delta, start);
    for (const auto& cert : result.certificates) rows.push_back(certificate_row(cert));
    emit(rows, schemas::certificate(), "certificates.csv");
  }

  void write_manifest() {
    nlohmann::ordered_json m;
    m["tool"] = "sdepca";
    m["version"] = kVersion;
    m["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                         std::to_string(EIGEN_MINOR_VERSION);
    m["command"] = std::string(to_string(config_.command));
    m["seed"] = config_.mc.seed;
    m["config_hash"] = "fnv1a64:" + bundle_.config_hash;
    m["config"] = serialize_config(config_);
    auto files = nlohmann::ordered_json::array();
    for (const auto& f : bundle_.files) files.push_back(f.filename().string());
    m["files"] = files;
    bundle_.manifest = bundle_.directory / "manifest.json";
    std::ofstream out(bundle_.manifest, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + bundle_.manifest.string());
    out << m.dump(2) << "\n";
    if (!out) throw IoError("failed writing " + bundle_.manifest.string());
  }

  const ExperimentConfig& config_;
  RunOptions options_;
  System system_;
  ReportBundle bundle_;
  std::optional<std::int64_t> diverged_;
};

}  // namespace

ReportBundle run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  validate_config(config);
  if (options.threads < 1) throw ValidationError("threads must be at least 1");
  return Run(config, options).execute();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return 2;
  if (dynamic_cast<const DivergedError*>(&e)) return 3;
  if (dynamic_cast<const InsufficientDataError*>(&e)) return 4;
  if (dynamic_cast<const NoCertificateError*>(&e)) return 5;
  return 1;
}

}  // namespace sdepca
