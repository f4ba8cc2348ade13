#pragma once

// CSV report rows for every result type, and the writer.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sdepca/certificates.hpp"
#include "sdepca/convergence.hpp"
#include "sdepca/integrators.hpp"
#include "sdepca/lyapunov.hpp"
#include "sdepca/moments.hpp"

namespace sdepca {

struct CsvSchema {
  std::string name;
  std::vector<std::string> columns;
};

using CsvRow = std::vector<std::string>;

namespace schemas {
const CsvSchema& moment_series();
const CsvSchema& trajectory();
const CsvSchema& certificate();
const CsvSchema& lyapunov();
const CsvSchema& strong_error();
const CsvSchema& threshold();
const CsvSchema& decay_fit();
}  // namespace schemas

/// Shortest round-tripping decimal ("%.17g"); "inf", "-inf", "nan" otherwise.
std::string format_number(double x);

/// exp(log_value) in decimal scientific notation, with an exponent of any
/// size: format_log_scaled(-1000) == "5.075958897550e-435".
/// Values inside double range print with 15 significant digits, the
/// precision that survives the exp(log) round trip.
std::string format_log_scaled(double log_value);

/// Renders the string with the header row first. Throws ValidationError if a
/// row has the wrong number of fields or a field needs quoting.
std::string render_csv(const std::vector<CsvRow>& rows, const CsvSchema& schema);

/// Writes render_csv(rows, schema) to path. Throws IoError when the file
/// cannot be written.
void emit_report(const std::vector<CsvRow>& rows, const CsvSchema& schema, const std::filesystem::path& path);

std::vector<CsvRow> moment_rows(const MomentSeries& series);
std::vector<CsvRow> trajectory_rows(std::uint64_t path_id, const Trajectory<double>& traj);
CsvRow certificate_row(const Certificate& cert);
/// The kind=LYAP row of the certificate table.
CsvRow lyapunov_certificate_row(const LyapunovReport& report, double K);
CsvRow lyapunov_row(const LyapunovReport& report);
std::vector<CsvRow> strong_error_rows(const StrongErrorStudy& study);
CsvRow threshold_row(const Threshold& threshold, const CertificateParams& params);
CsvRow decay_fit_row(Scheme scheme, const DecayFit& fit);

}  // namespace sdepca
