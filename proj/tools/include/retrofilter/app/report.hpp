#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "retrofilter/scenario.hpp"

namespace retrofilter::app {

/// Column headers of the per-run CSV files.
std::vector<std::string> truth_columns();
std::vector<std::string> detection_columns();
std::vector<std::string> track_columns();
std::vector<std::string> ssem_columns(int meas_dim = 3);
std::vector<std::string> metrics_columns();
std::vector<std::string> diagnostics_columns();

/// Minimal CSV table: header row, then rows of numbers printed with 17
/// significant digits. An empty optional prints as an empty field.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);

  CsvTable& add(const std::vector<double>& row);
  /// Raw, pre-formatted fields.
  CsvTable& add_fields(const std::vector<std::string>& fields);

  std::size_t rows() const { return rows_; }
  const std::string& text() const { return text_; }
  void write(const std::filesystem::path& path) const;

 private:
  std::size_t width_;
  std::size_t rows_ = 0;
  std::string text_;
};

std::string format_number(double v);

CsvTable truth_table(const scenario::TruthTrajectory& truth);
CsvTable detection_table(const std::vector<sensing::RuvMeasurement>& detections);
CsvTable track_table(const std::vector<ekf::GaussianEstimate>& track);
CsvTable ssem_table(const std::vector<ssem::Ssem>& measurements, int meas_dim);
CsvTable diagnostics_table(const std::vector<ssem::StepDiagnostics>& diagnostics);
CsvTable metrics_table(const scenario::MetricsSummary& metrics);

/// RMS table and NEES verdict.
std::string summary_text(const scenario::RunReport& report, const scenario::MetricsSummary& metrics);

/// Writes truth, source_track, ssem, refiltered, metrics and diagnostics CSVs
/// plus summary.txt into `dir`. Returns the written paths.
std::vector<std::filesystem::path> emit_report(const scenario::RunReport& report,
                                               const scenario::MetricsSummary& metrics,
                                               const std::filesystem::path& dir);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace retrofilter::app
