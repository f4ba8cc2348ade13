#include "sdepca/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "sdepca/errors.hpp"

namespace sdepca {

namespace {

CsvSchema make(std::string name, std::vector<std::string> columns) {
  return {std::move(name), std::move(columns)};
}

std::string log_or_empty(double log_value) {
  return std::isnan(log_value) ? std::string() : format_log_scaled(log_value);
}

// Exact integer while n_hat < 2^52; scientific beyond.
std::string format_count(double log_n) {
  if (log_n < 52.0 * std::numbers::ln2) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f", std::round(std::exp(log_n)));
    return buf;
  }
  return format_log_scaled(log_n);
}

}  // namespace

namespace schemas {

const CsvSchema& moment_series() {
  static const CsvSchema s = make("moment_series", {"t", "value", "half_width", "n_paths", "p"});
  return s;
}
const CsvSchema& trajectory() {
  static const CsvSchema s = make("trajectory", {"path_id", "step", "t", "component", "value"});
  return s;
}
const CsvSchema& certificate() {
  static const CsvSchema s = make("certificate", {"kind", "p", "K", "tau", "h", "delta", "verdict", "lhs_log",
                                                  "rhs_log", "n_hat", "implied_M_log", "implied_gamma"});
  return s;
}
const CsvSchema& lyapunov() {
  static const CsvSchema s = make("lyapunov", {"p", "lambda", "decay_rate", "method", "n_samples", "worst_point"});
  return s;
}
const CsvSchema& strong_error() {
  static const CsvSchema s =
      make("strong_error", {"h", "n_steps", "p", "n_paths", "error_p", "rms_error", "fitted_slope"});
  return s;
}
const CsvSchema& threshold() {
  static const CsvSchema s = make("threshold", {"kind", "p", "K", "tau", "delta", "assumed_M_log", "assumed_gamma",
                                                "threshold_log", "threshold", "min_substeps"});
  return s;
}
const CsvSchema& decay_fit() {
  static const CsvSchema s =
      make("decay_fit", {"scheme", "M", "gamma", "window_start", "window_end", "residual", "n_points"});
  return s;
}

}  // namespace schemas

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string format_log_scaled(double log_value) {
  if (std::isnan(log_value)) return "nan";
  if (log_value == -INFINITY) return "0";
  if (log_value == INFINITY) return "inf";
  if (std::fabs(log_value) < 700.0) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.15g", std::exp(log_value));
    return buf;
  }
  const double e10 = log_value / std::numbers::ln10;
  double exponent = std::floor(e10);
  double mantissa = std::pow(10.0, e10 - exponent);
  // The fractional part of e10 carries about |e10| * 2^-52 absolute error.
  const int digits = std::clamp(static_cast<int>(std::floor(-std::log10(std::fabs(e10) * 2.3e-16))), 3, 17);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits - 1, mantissa);
  if (buf[0] == '1' && buf[1] == '0') {
    mantissa /= 10.0;
    exponent += 1.0;
    std::snprintf(buf, sizeof buf, "%.*f", digits - 1, mantissa);
  }
  char out[96];
  std::snprintf(out, sizeof out, "%se%+.0f", buf, exponent);
  return out;
}

std::string render_csv(const std::vector<CsvRow>& rows, const CsvSchema& schema) {
  auto append = [](std::string& out, const CsvRow& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i].find_first_of(",\"\n\r") != std::string::npos) {
        throw ValidationError("CSV field needs quoting: " + row[i]);
      }
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  };
  std::string out;
  append(out, schema.columns);
  for (const auto& row : rows) {
    if (row.size() != schema.columns.size()) {
      throw ShapeError(schema.name + " row has " + std::to_string(row.size()) + " fields, expected " +
                       std::to_string(schema.columns.size()));
    }
    append(out, row);
  }
  return out;
}

void emit_report(const std::vector<CsvRow>& rows, const CsvSchema& schema, const std::filesystem::path& path) {
  const std::string text = render_csv(rows, schema);
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open " + path.string() + " for writing");
  file.write(text.data(), static_cast<std::streamsize>(text.size()));
  file.close();
  if (!file) throw IoError("failed writing " + path.string());
}

std::vector<CsvRow> moment_rows(const MomentSeries& series) {
  std::vector<CsvRow> rows;
  rows.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    rows.push_back({format_number(series.times[i]), format_number(series.values[i]),
                    format_number(series.half_widths[i]), std::to_string(series.n_paths), format_number(series.p)});
  }
  return rows;
}

std::vector<CsvRow> trajectory_rows(std::uint64_t path_id, const Trajectory<double>& traj) {
  std::vector<CsvRow> rows;
  rows.reserve(static_cast<std::size_t>(traj.states.size()));
  for (Eigen::Index n = 0; n < traj.states.cols(); ++n) {
    const std::string t = format_number(traj.grid.time(n));
    for (Eigen::Index i = 0; i < traj.states.rows(); ++i) {
      rows.push_back({std::to_string(path_id), std::to_string(n), t, std::to_string(i),
                      format_number(traj.states(i, n))});
    }
  }
  return rows;
}

CsvRow certificate_row(const Certificate& cert) {
  const auto& in = cert.inputs;
  return {std::string(to_string(cert.kind)),
          format_number(in.p),
          format_number(in.K),
          log_or_empty(in.log_tau),
          log_or_empty(in.log_h),
          std::isnan(in.delta) ? std::string() : format_number(in.delta),
          cert.pass ? "pass" : "fail",
          format_number(cert.lhs_log),
          format_number(cert.rhs_log),
          cert.log_n_hat ? format_count(*cert.log_n_hat) : std::string(),
          cert.implied ? format_number(cert.implied->log_M) : std::string(),
          cert.implied ? format_number(cert.implied->rate) : std::string()};
}

CsvRow lyapunov_certificate_row(const LyapunovReport& report, double K) {
  const bool pass = report.lambda > 0.0;
  // The decisive inequality is Q <= -lambda |y|^4 with lambda > 0, i.e. max Q < 0.
  return {"LYAP",
          format_number(report.p),
          format_number(K),
          "",
          "",
          "",
          pass ? "pass" : "fail",
          format_number(-report.lambda),
          "0",
          "",
          pass ? format_number(0.0) : std::string(),
          pass ? format_number(report.decay_pair().rate) : std::string()};
}

CsvRow lyapunov_row(const LyapunovReport& report) {
  std::string point;
  for (Eigen::Index i = 0; i < report.worst_point.size(); ++i) {
    if (i) point += ' ';
    point += format_number(report.worst_point(i));
  }
  return {format_number(report.p),         format_number(report.lambda),
          format_number(report.lambda * report.p / 2.0), std::string(to_string(report.method)),
          std::to_string(report.n_samples), point};
}

std::vector<CsvRow> strong_error_rows(const StrongErrorStudy& study) {
  std::vector<CsvRow> rows;
  for (const auto& r : study.rows) {
    rows.push_back({format_number(r.h), std::to_string(r.n_steps), format_number(study.p),
                    std::to_string(study.n_paths), format_number(r.error_p), format_number(r.root_error),
                    format_number(study.slope)});
  }
  return rows;
}

CsvRow threshold_row(const Threshold& threshold, const CertificateParams& params) {
  const bool on_tau = threshold.kind == CertificateKind::Q4;
  std::string substeps;
  if (threshold.min_substeps) {
    substeps = std::to_string(*threshold.min_substeps);
  } else if (!std::isnan(threshold.log_min_substeps)) {
    substeps = format_log_scaled(threshold.log_min_substeps);
  }
  return {std::string(to_string(threshold.kind)),
          format_number(params.p),
          format_number(params.K),
          on_tau ? log_or_empty(params.log_tau) : std::string(),
          std::isnan(params.delta) ? std::string() : format_number(params.delta),
          format_number(params.assumed.log_M),
          format_number(params.assumed.rate),
          format_number(threshold.log_value),
          format_log_scaled(threshold.log_value),
          substeps};
}

CsvRow decay_fit_row(Scheme scheme, const DecayFit& fit) {
  return {std::string(to_string(scheme)), format_number(fit.M),          format_number(fit.gamma),
          format_number(fit.window_start), format_number(fit.window_end), format_number(fit.residual),
          std::to_string(fit.n_points)};
}

}  // namespace sdepca
