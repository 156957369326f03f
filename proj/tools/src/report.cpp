#include "retrofilter/app/report.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "retrofilter/errors.hpp"

namespace retrofilter::app {
namespace {

const std::vector<std::string> kStateNames{"x", "y", "z", "vx", "vy", "vz"};

std::vector<std::string> state_columns(const std::string& prefix) {
  std::vector<std::string> out;
  for (const auto& n : kStateNames) out.push_back(prefix + n);
  return out;
}

template <typename... Lists>
std::vector<std::string> concat(std::vector<std::string> head, const Lists&... rest) {
  (head.insert(head.end(), rest.begin(), rest.end()), ...);
  return head;
}

std::vector<std::string> stats_columns(const std::string& who) {
  return {who + "_pos_err", who + "_vel_err", who + "_pos_sigma", who + "_vel_sigma", who + "_nees"};
}

}  // namespace

std::string format_number(double v) { return fmt::format("{:.17g}", v); }

std::vector<std::string> truth_columns() { return concat({"epoch"}, kStateNames); }

std::vector<std::string> detection_columns() {
  return {"epoch", "range", "u", "v", "sigma_range", "sigma_u", "sigma_v", "x", "y", "z"};
}

std::vector<std::string> track_columns() {
  return concat({"epoch"}, kStateNames, state_columns("sigma_"));
}

std::vector<std::string> ssem_columns(int meas_dim) {
  std::vector<std::string> out{"epoch"};
  for (int i = 0; i < meas_dim; ++i) out.push_back("z_" + kStateNames.at(i));
  for (int i = 0; i < meas_dim; ++i) out.push_back("sigma_" + kStateNames.at(i));
  out.push_back("eta_used");
  return out;
}

std::vector<std::string> metrics_columns() {
  return concat({"epoch"}, stats_columns("source"), stats_columns("refiltered"),
                std::vector<std::string>{"in_window"});
}

std::vector<std::string> diagnostics_columns() {
  return {"epoch",       "eta_used", "eta_hat",    "eta_lower",          "eta_upper",
          "iterations",  "min_eig",  "tol_psd",    "off_block_residual", "discarded_gain_norm",
          "skipped"};
}

CsvTable::CsvTable(std::vector<std::string> columns) : width_(columns.size()) {
  for (std::size_t i = 0; i < columns.size(); ++i) text_ += (i ? "," : "") + columns[i];
  text_ += '\n';
}

CsvTable& CsvTable::add(const std::vector<double>& row) {
  std::vector<std::string> fields;
  fields.reserve(row.size());
  for (double v : row) fields.push_back(format_number(v));
  return add_fields(fields);
}

CsvTable& CsvTable::add_fields(const std::vector<std::string>& fields) {
  if (fields.size() != width_)
    throw Error(ErrorKind::Dimension,
                fmt::format("csv row has {} fields, header has {}", fields.size(), width_));
  for (std::size_t i = 0; i < fields.size(); ++i) text_ += (i ? "," : "") + fields[i];
  text_ += '\n';
  ++rows_;
  return *this;
}

void CsvTable::write(const std::filesystem::path& path) const { write_text(path, text_); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, fmt::format("cannot open '{}' for writing", path.string()));
  out << text;
  out.close();
  if (!out) throw Error(ErrorKind::Io, fmt::format("failed writing '{}'", path.string()));
}

CsvTable truth_table(const scenario::TruthTrajectory& truth) {
  CsvTable t(truth_columns());
  for (std::size_t k = 0; k < truth.epochs.size(); ++k) {
    const StateVector& x = truth.states[k];
    t.add({truth.epochs[k], x(0), x(1), x(2), x(3), x(4), x(5)});
  }
  return t;
}

CsvTable detection_table(const std::vector<sensing::RuvMeasurement>& detections) {
  CsvTable t(detection_columns());
  for (const auto& d : detections) {
    const Vec3 p = sensing::ruv_to_ecr(d.z, d.site_ecr, d.frame);
    t.add({d.epoch, d.z(0), d.z(1), d.z(2), std::sqrt(d.noise_cov(0, 0)),
           std::sqrt(d.noise_cov(1, 1)), std::sqrt(d.noise_cov(2, 2)), p(0), p(1), p(2)});
  }
  return t;
}

CsvTable track_table(const std::vector<ekf::GaussianEstimate>& track) {
  CsvTable t(track_columns());
  for (const auto& e : track) {
    std::vector<double> row{e.epoch};
    for (int i = 0; i < kStateDim; ++i) row.push_back(e.mean(i));
    for (int i = 0; i < kStateDim; ++i) row.push_back(std::sqrt(e.cov(i, i)));
    t.add(row);
  }
  return t;
}

CsvTable ssem_table(const std::vector<ssem::Ssem>& measurements, int meas_dim) {
  CsvTable t(ssem_columns(meas_dim));
  for (const auto& s : measurements) {
    std::vector<double> row{s.epoch};
    for (int i = 0; i < meas_dim; ++i) row.push_back(s.z(i));
    for (int i = 0; i < meas_dim; ++i) row.push_back(std::sqrt(s.cov(i, i)));
    row.push_back(s.eta_used);
    t.add(row);
  }
  return t;
}

CsvTable diagnostics_table(const std::vector<ssem::StepDiagnostics>& diagnostics) {
  CsvTable t(diagnostics_columns());
  for (const auto& d : diagnostics) {
    std::vector<std::string> f{format_number(d.epoch), format_number(d.eta_used)};
    if (d.eta_estimate) {
      const auto& e = *d.eta_estimate;
      for (double v : {e.eta_hat, e.lower, e.upper}) f.push_back(format_number(v));
      f.push_back(std::to_string(e.iterations));
      f.push_back(format_number(e.min_eig_at_solution));
      f.push_back(format_number(e.tol_psd));
    } else {
      f.insert(f.end(), 6, "");
    }
    f.push_back(format_number(d.off_block_residual));
    f.push_back(format_number(d.discarded_gain_norm));
    f.push_back(d.skipped ? "1" : "0");
    t.add_fields(f);
  }
  return t;
}

CsvTable metrics_table(const scenario::MetricsSummary& metrics) {
  CsvTable t(metrics_columns());
  for (const auto& m : metrics.per_epoch) {
    const bool in_window = m.epoch >= metrics.window_start && m.epoch <= metrics.window_end;
    std::vector<double> row{m.epoch};
    for (const auto* s : {&m.source, &m.refiltered}) {
      row.insert(row.end(), {s->pos_err_norm, s->vel_err_norm, s->pos_sigma_rss, s->vel_sigma_rss, s->nees});
    }
    row.push_back(in_window ? 1.0 : 0.0);
    t.add(row);
  }
  return t;
}

std::string summary_text(const scenario::RunReport& report, const scenario::MetricsSummary& m) {
  const auto& cfg = report.config;
  std::size_t ssem_count = 0;
  std::size_t skipped = 0;
  for (const auto& e : report.epochs) {
    if (e.ssem) ++ssem_count;
    if (e.diagnostics && e.diagnostics->skipped) ++skipped;
  }

  std::string out;
  auto line = [&](const std::string& s) { out += s + "\n"; };
  line("retrofilter run summary");
  line(fmt::format("seed: {}", cfg.seed));
  line(fmt::format("source eta: {:g}   refilter eta: {:g}   eta mode: {}", cfg.source_eta,
                   cfg.refilter_eta, cfg.eta_mode == scenario::EtaMode::Known ? "known" : "estimated"));
  if (!report.epochs.empty()) {
    line(fmt::format("track epochs: {} (t = {:g} .. {:g} s)", report.epochs.size(),
                     report.epochs.front().epoch, report.epochs.back().epoch));
  }
  line(fmt::format("equivalent measurements: {}   skipped steps: {}", ssem_count, skipped));
  line(fmt::format("metrics window: [{:g}, {:g}] s, {} samples", m.window_start, m.window_end,
                   m.window_samples));
  line("");
  line(fmt::format("{:<12}{:>20}{:>24}{:>14}", "", "position RMS [m]", "velocity RMS [m/s]", "mean NEES"));
  line(fmt::format("{:<12}{:>20.6g}{:>24.6g}{:>14.4f}", "source", m.source_rms.position,
                   m.source_rms.velocity, m.source_nees_mean));
  line(fmt::format("{:<12}{:>20.6g}{:>24.6g}{:>14.4f}", "refiltered", m.refiltered_rms.position,
                   m.refiltered_rms.velocity, m.refiltered_nees_mean));
  line("");
  line(fmt::format("NEES 95% band (6 dof, one run): [{:.4f}, {:.4f}]", m.nees_band.lower,
                   m.nees_band.upper));
  auto verdict = [&](double nees) {
    if (m.nees_band.contains(nees)) return std::string("consistent");
    return std::string(nees < m.nees_band.lower ? "conservative (below band)"
                                                : "optimistic (above band)");
  };
  line("source NEES: " + verdict(m.source_nees_mean));
  line("refiltered NEES: " + verdict(m.refiltered_nees_mean));
  const bool pos = m.refiltered_rms.position < m.source_rms.position;
  const bool vel = m.refiltered_rms.velocity < m.source_rms.velocity;
  line(fmt::format("refiltered RMS lower than source: position {}, velocity {}", pos ? "yes" : "no",
                   vel ? "yes" : "no"));
  return out;
}

std::vector<std::filesystem::path> emit_report(const scenario::RunReport& report,
                                               const scenario::MetricsSummary& metrics,
                                               const std::filesystem::path& dir) {
  std::vector<ekf::GaussianEstimate> source, refiltered;
  std::vector<ssem::Ssem> measurements;
  std::vector<ssem::StepDiagnostics> diagnostics;
  for (const auto& e : report.epochs) {
    source.push_back(e.source);
    refiltered.push_back(e.refiltered);
    if (e.ssem) measurements.push_back(*e.ssem);
    if (e.diagnostics) diagnostics.push_back(*e.diagnostics);
  }

  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& name, const CsvTable& table) {
    table.write(dir / name);
    written.push_back(dir / name);
  };
  put("truth.csv", truth_table(report.truth));
  put("source_track.csv", track_table(source));
  put("ssem.csv", ssem_table(measurements, report.config.meas_dim));
  put("refiltered.csv", track_table(refiltered));
  put("metrics.csv", metrics_table(metrics));
  put("diagnostics.csv", diagnostics_table(diagnostics));
  write_text(dir / "summary.txt", summary_text(report, metrics));
  written.push_back(dir / "summary.txt");
  return written;
}

}  // namespace retrofilter::app
