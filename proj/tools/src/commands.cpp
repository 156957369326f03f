#include "retrofilter/app/commands.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

#include <fmt/format.h>

#include "retrofilter/app/report.hpp"
#include "retrofilter/errors.hpp"

namespace retrofilter::app {
namespace {

namespace fs = std::filesystem;
using scenario::with_stage;

struct Output {
  fs::path dir;
  CommandResult result;

  void table(const std::string& name, const CsvTable& t) {
    with_stage("output", [&] { t.write(dir / name); });
    result.files.push_back(dir / name);
  }
  void text(const std::string& name, const std::string& body) {
    with_stage("output", [&] { write_text(dir / name, body); });
    result.files.push_back(dir / name);
  }
};

Output open_output(const CliConfig& cli) {
  with_stage("output", [&] {
    std::error_code ec;
    fs::create_directories(cli.output_dir, ec);
    if (ec || !fs::is_directory(cli.output_dir))
      throw Error(ErrorKind::Io, fmt::format("cannot create output directory '{}': {}",
                                             cli.output_dir.string(), ec.message()));
  });
  return Output{cli.output_dir, {}};
}

std::string stage_summary(const AppConfig& cfg, const std::string& what,
                          const std::vector<std::pair<std::string, std::size_t>>& counts) {
  std::string out = fmt::format("retrofilter {} summary\nseed: {}\n", what, cfg.scenario.seed);
  for (const auto& [name, n] : counts) out += fmt::format("{}: {}\n", name, n);
  return out;
}

// --- staged runs ------------------------------------------------------------

struct Staged {
  scenario::TruthTrajectory truth;
  std::vector<sensing::RuvMeasurement> detections;
  ekf::TrackHistory source;
  ssem::Decorrelation decorrelation;
};

Staged run_until(const scenario::ScenarioConfig& sc, Subcommand upto) {
  Staged s;
  with_stage("config", [&] { sc.validate(); });
  s.truth = with_stage("truth", [&] { return scenario::simulate_truth(sc); });
  s.detections = with_stage("detect", [&] { return scenario::simulate_detections(sc, s.truth); });
  if (upto == Subcommand::Simulate) return s;
  s.source = with_stage("track", [&] { return scenario::run_source_filter(sc, s.detections); });
  if (upto == Subcommand::Track) return s;
  s.decorrelation = with_stage("decorrelate", [&] { return scenario::decorrelate_source(sc, s.source); });
  return s;
}

scenario::MetricsSummary metrics_for(const scenario::RunReport& report, const AppConfig& cfg) {
  return with_stage("metrics", [&] { return scenario::compute_metrics(report, cfg.window); });
}

CommandResult partial(const CliConfig& cli, const AppConfig& cfg) {
  const Staged s = run_until(cfg.scenario, cli.subcommand);
  Output out = open_output(cli);
  out.table("truth.csv", truth_table(s.truth));
  out.table("detections.csv", detection_table(s.detections));
  std::vector<std::pair<std::string, std::size_t>> counts{{"truth epochs", s.truth.epochs.size()},
                                                          {"detections", s.detections.size()}};
  if (cli.subcommand != Subcommand::Simulate) {
    out.table("source_track.csv", track_table(s.source.estimates));
    counts.emplace_back("source track epochs", s.source.estimates.size());
  }
  if (cli.subcommand == Subcommand::Decorrelate) {
    out.table("ssem.csv", ssem_table(s.decorrelation.measurements, cfg.scenario.meas_dim));
    out.table("diagnostics.csv", diagnostics_table(s.decorrelation.diagnostics));
    counts.emplace_back("equivalent measurements", s.decorrelation.measurements.size());
  }
  out.text("config.yaml", format_config(cfg));
  out.text("summary.txt", stage_summary(cfg, to_string(cli.subcommand), counts));
  return out.result;
}

CommandResult full(const CliConfig& cli, const AppConfig& cfg) {
  const scenario::RunReport report = scenario::run_scenario(cfg.scenario);
  const scenario::MetricsSummary metrics = metrics_for(report, cfg);
  Output out = open_output(cli);
  const auto files = with_stage("output", [&] { return emit_report(report, metrics, out.dir); });
  out.result.files.insert(out.result.files.end(), files.begin(), files.end());
  out.table("detections.csv", detection_table(report.detections));
  out.text("config.yaml", format_config(cfg));
  return out.result;
}

// --- compare ------------------------------------------------------------------

struct SeedResult {
  std::uint64_t seed = 0;
  scenario::MetricsSummary metrics;
};

CommandResult compare(const CliConfig& cli, const AppConfig& cfg) {
  const std::size_t runs = cfg.compare.runs;
  std::vector<SeedResult> results(runs);
  std::vector<std::exception_ptr> errors(runs);

  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < runs; i += stride) {
      try {
        scenario::ScenarioConfig sc = cfg.scenario;
        sc.seed = cfg.scenario.seed + i;
        results[i].seed = sc.seed;
        const auto report = scenario::run_scenario(sc);
        results[i].metrics = metrics_for(report, cfg);
        results[i].metrics.per_epoch.clear();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::min<std::size_t>(runs, 16));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work, w, workers);
  work(0, workers);
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < runs; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const scenario::StageError& e) {
      throw scenario::StageError(e.kind(), e.stage(), fmt::format("seed {}: {}", results[i].seed,
                                                                  e.what()));
    }
  }

  CsvTable table({"seed", "source_rms_pos", "source_rms_vel", "refiltered_rms_pos",
                  "refiltered_rms_vel", "source_nees", "refiltered_nees", "refiltered_better",
                  "nees_in_band"});
  std::size_t better = 0, in_band = 0;
  double nees_sum = 0.0, src_pos = 0.0, src_vel = 0.0, ref_pos = 0.0, ref_vel = 0.0;
  for (const auto& r : results) {
    const auto& m = r.metrics;
    const bool b = m.refiltered_rms.position < m.source_rms.position &&
                   m.refiltered_rms.velocity < m.source_rms.velocity;
    const bool c = m.nees_band.contains(m.refiltered_nees_mean);
    better += b;
    in_band += c;
    nees_sum += m.refiltered_nees_mean;
    src_pos += m.source_rms.position * m.source_rms.position;
    src_vel += m.source_rms.velocity * m.source_rms.velocity;
    ref_pos += m.refiltered_rms.position * m.refiltered_rms.position;
    ref_vel += m.refiltered_rms.velocity * m.refiltered_rms.velocity;
    std::vector<std::string> fields{std::to_string(r.seed)};
    for (double v : {m.source_rms.position, m.source_rms.velocity, m.refiltered_rms.position,
                     m.refiltered_rms.velocity, m.source_nees_mean, m.refiltered_nees_mean})
      fields.push_back(format_number(v));
    fields.push_back(b ? "1" : "0");
    fields.push_back(c ? "1" : "0");
    table.add_fields(fields);
  }

  const double n = static_cast<double>(runs);
  const auto single = scenario::chi_square_band(kStateDim, 1);
  const auto ensemble = scenario::chi_square_band(kStateDim, runs);
  std::string summary;
  summary += fmt::format("retrofilter compare summary\nseeds: {} .. {} ({} runs)\n",
                         cfg.scenario.seed, cfg.scenario.seed + runs - 1, runs);
  summary += fmt::format("source eta: {:g}   refilter eta: {:g}\n\n", cfg.scenario.source_eta,
                         cfg.scenario.refilter_eta);
  summary += fmt::format("{:<12}{:>20}{:>24}\n", "", "position RMS [m]", "velocity RMS [m/s]");
  summary += fmt::format("{:<12}{:>20.6g}{:>24.6g}\n", "source", std::sqrt(src_pos / n),
                         std::sqrt(src_vel / n));
  summary += fmt::format("{:<12}{:>20.6g}{:>24.6g}\n\n", "refiltered", std::sqrt(ref_pos / n),
                         std::sqrt(ref_vel / n));
  summary += fmt::format("refiltered RMS lower in both position and velocity: {}/{} seeds\n", better, runs);
  summary += fmt::format("refiltered NEES inside the one-run band [{:.4f}, {:.4f}]: {}/{} seeds\n",
                         single.lower, single.upper, in_band, runs);
  summary += fmt::format("ensemble mean refiltered NEES: {:.4f} ({}-run band [{:.4f}, {:.4f}])\n",
                         nees_sum / n, runs, ensemble.lower, ensemble.upper);

  Output out = open_output(cli);
  out.table("compare.csv", table);
  out.text("config.yaml", format_config(cfg));
  out.text("summary.txt", summary);
  return out.result;
}

// --- reproduce ----------------------------------------------------------------

const char* const kAxes[] = {"x", "y", "z"};

CsvTable error_curves(const scenario::MetricsSummary& m, bool velocity) {
  std::vector<std::string> cols{"epoch"};
  for (const char* who : {"source", "refiltered"})
    for (const char* a : kAxes) {
      cols.push_back(fmt::format("{}_err_{}", who, a));
      cols.push_back(fmt::format("{}_sigma_{}", who, a));
    }
  for (const char* who : {"source", "refiltered"}) {
    cols.push_back(fmt::format("{}_err", who));
    cols.push_back(fmt::format("{}_sigma", who));
  }
  CsvTable t(cols);
  for (const auto& e : m.per_epoch) {
    std::vector<double> row{e.epoch};
    for (const auto* s : {&e.source, &e.refiltered}) {
      const Vec3& err = velocity ? s->vel_err : s->pos_err;
      const Vec3& sig = velocity ? s->vel_sigma : s->pos_sigma;
      for (int i = 0; i < 3; ++i) row.insert(row.end(), {err(i), sig(i)});
    }
    for (const auto* s : {&e.source, &e.refiltered}) {
      row.push_back(velocity ? s->vel_err_norm : s->pos_err_norm);
      row.push_back(velocity ? s->vel_sigma_rss : s->pos_sigma_rss);
    }
    t.add(row);
  }
  return t;
}

std::string error_script(const std::string& fig, const std::string& title) {
  // Norm columns: 14 source err, 15 source sigma, 16 refiltered err, 17 refiltered sigma.
  std::string s;
  s += "# gnuplot script; run from this directory: gnuplot " + fig + ".gp\n";
  s += "set datafile separator ','\n";
  s += "set terminal pngcairo size 900,900\n";
  s += "set output '" + fig + ".png'\n";
  s += "set key top right\nset grid\nset logscale y\nset xlabel 'time [s]'\n";
  s += "set multiplot layout 2,1 title '" + title + "'\n";
  for (const auto& [file, label] : {std::pair{"position", "position error [m]"},
                                    std::pair{"velocity", "velocity error [m/s]"}}) {
    const std::string data = fig + "_" + file + ".csv";
    s += fmt::format("set ylabel '{}'\n", label);
    s += fmt::format(
        "plot '{0}' skip 1 using 1:14 with lines lw 1 title 'source |error|', \\\n"
        "     '{0}' skip 1 using 1:15 with lines dt 2 title 'source 1-sigma', \\\n"
        "     '{0}' skip 1 using 1:16 with lines lw 1 title 'refiltered |error|', \\\n"
        "     '{0}' skip 1 using 1:17 with lines dt 2 title 'refiltered 1-sigma'\n",
        data);
  }
  s += "unset multiplot\n";
  return s;
}

std::string fig2_script() {
  // Columns: 1 epoch, 4 detection_err, 5 detection_sigma, 7 ssem_err, 8 ssem_sigma.
  std::string s;
  s += "# gnuplot script; run from this directory: gnuplot fig2.gp\n";
  s += "set datafile separator ','\n";
  s += "set terminal pngcairo size 900,1200\n";
  s += "set output 'fig2.png'\n";
  s += "set key top right\nset grid\nset xlabel 'time [s]'\n";
  s += "set multiplot layout 3,1 title 'detections and equivalent measurements minus truth'\n";
  for (const char* a : kAxes) {
    const std::string data = fmt::format("fig2_{}.csv", a);
    s += fmt::format("set ylabel '{} error [m]'\n", a);
    s += fmt::format(
        "plot '{0}' skip 1 using 1:4 with points pt 7 ps 0.3 title 'detection', \\\n"
        "     '{0}' skip 1 using 1:7 with points pt 7 ps 0.3 title 'equivalent measurement', \\\n"
        "     '{0}' skip 1 using 1:8 with lines dt 2 title 'ssem 1-sigma', \\\n"
        "     '{0}' skip 1 using 1:(-$8) with lines dt 2 notitle\n",
        data);
  }
  s += "unset multiplot\n";
  return s;
}

std::vector<CsvTable> fig2_tables(const scenario::RunReport& report) {
  std::map<double, const sensing::RuvMeasurement*> by_epoch;
  for (const auto& d : report.detections) by_epoch[d.epoch] = &d;
  std::vector<CsvTable> tables;
  for (int axis = 0; axis < 3; ++axis) {
    CsvTable t({"epoch", "truth", "detection", "detection_err", "detection_sigma", "ssem",
                "ssem_err", "ssem_sigma"});
    for (const auto& e : report.epochs) {
      if (!e.ssem || e.ssem->z.size() <= axis) continue;
      const auto it = by_epoch.find(e.epoch);
      if (it == by_epoch.end()) continue;
      const auto& d = *it->second;
      const Vec3 p = sensing::ruv_to_ecr(d.z, d.site_ecr, d.frame);
      const Mat3 g = sensing::ruv_to_ecr_jacobian(d.z, d.frame);
      const Mat3 c = g * d.noise_cov * g.transpose();
      const double truth = e.truth(axis);
      t.add({e.epoch, truth, p(axis), p(axis) - truth, std::sqrt(c(axis, axis)), e.ssem->z(axis),
             e.ssem->z(axis) - truth, std::sqrt(e.ssem->cov(axis, axis))});
    }
    tables.push_back(std::move(t));
  }
  return tables;
}

std::string checks_text(const std::vector<FigureCheck>& checks) {
  std::string s = "\nfigure checks\n";
  for (const auto& c : checks)
    s += fmt::format("{} {}: {:.6g} (threshold {:g})\n", c.pass ? "PASS" : "FAIL", c.name, c.value,
                     c.threshold);
  return s;
}

CommandResult reproduce(const CliConfig& cli, const AppConfig& cfg) {
  const std::string fig = to_string(cli.figure);
  const scenario::RunReport report = scenario::run_scenario(cfg.scenario);
  const scenario::MetricsSummary metrics = metrics_for(report, cfg);

  std::vector<FigureCheck> checks;
  const double start = cfg.scenario.metrics_window_start;
  if (cli.figure == Figure::Fig2) {
    const double cov = ssem_coverage(report, 0, 4.0);
    checks.push_back({"x components within 4 sigma of truth", cov, 0.95, cov >= 0.95});
  } else if (cli.figure == Figure::Fig3) {
    const ErrorGap gap = max_error_gap(metrics, start);
    checks.push_back({fmt::format("max position error gap after {:g} s / source sigma", start),
                      gap.position, 1e-3, gap.position <= 1e-3});
    checks.push_back({fmt::format("max velocity error gap after {:g} s / source sigma", start),
                      gap.velocity, 1e-3, gap.velocity <= 1e-3});
  } else {
    const auto& m = metrics;
    checks.push_back({"refiltered / source position RMS", m.refiltered_rms.position / m.source_rms.position,
                      1.0, m.refiltered_rms.position < m.source_rms.position});
    checks.push_back({"refiltered / source velocity RMS", m.refiltered_rms.velocity / m.source_rms.velocity,
                      1.0, m.refiltered_rms.velocity < m.source_rms.velocity});
  }

  Output out = open_output(cli);
  const auto files = with_stage("output", [&] { return emit_report(report, metrics, out.dir); });
  out.result.files.insert(out.result.files.end(), files.begin(), files.end());
  out.table("detections.csv", detection_table(report.detections));
  if (cli.figure == Figure::Fig2) {
    const auto tables = fig2_tables(report);
    for (int axis = 0; axis < 3; ++axis) out.table(fmt::format("fig2_{}.csv", kAxes[axis]), tables[axis]);
    out.text("fig2.gp", fig2_script());
  } else {
    out.table(fig + "_position.csv", error_curves(metrics, false));
    out.table(fig + "_velocity.csv", error_curves(metrics, true));
    const std::string title =
        fmt::format("source (eta {:g}) and refiltered (eta {:g}) track errors",
                    cfg.scenario.source_eta, cfg.scenario.refilter_eta);
    out.text(fig + ".gp", error_script(fig, title));
  }
  out.text("config.yaml", format_config(cfg));
  with_stage("output", [&] {
    write_text(out.dir / "summary.txt", summary_text(report, metrics) + checks_text(checks));
  });
  out.result.checks = checks;
  return out.result;
}

}  // namespace

std::string to_string(Subcommand s) {
  switch (s) {
    case Subcommand::Simulate: return "simulate";
    case Subcommand::Track: return "track";
    case Subcommand::Decorrelate: return "decorrelate";
    case Subcommand::Refilter: return "refilter";
    case Subcommand::Compare: return "compare";
    case Subcommand::Reproduce: return "reproduce";
  }
  return "?";
}

std::string to_string(Figure f) {
  switch (f) {
    case Figure::Fig2: return "fig2";
    case Figure::Fig3: return "fig3";
    case Figure::Fig4: return "fig4";
  }
  return "?";
}

std::optional<Figure> figure_from_string(const std::string& name) {
  for (Figure f : {Figure::Fig2, Figure::Fig3, Figure::Fig4})
    if (to_string(f) == name) return f;
  return std::nullopt;
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"config",      "truth",    "detect", "track",
                                              "decorrelate", "refilter", "assemble", "metrics",
                                              "output",      "check"};
  return names;
}

int exit_code_for_stage(const std::string& stage) {
  const auto& names = stage_names();
  const auto it = std::find(names.begin(), names.end(), stage);
  return it == names.end() ? 1 : 10 + static_cast<int>(it - names.begin());
}

AppConfig resolve_config(const CliConfig& cli) {
  return with_stage("config", [&] {
    AppConfig cfg;
    if (cli.config_path) {
      cfg = parse_config(*cli.config_path);
    } else if (cli.subcommand == Subcommand::Reproduce) {
      cfg = preset_config(cli.figure == Figure::Fig4 ? "paper_fig4" : "paper_fig3");
    } else {
      throw Error(ErrorKind::Config, "--config is required for " + to_string(cli.subcommand));
    }
    if (cli.seed) cfg.scenario.seed = *cli.seed;
    return cfg;
  });
}

CommandResult run_command(const CliConfig& cli) {
  const AppConfig cfg = resolve_config(cli);
  switch (cli.subcommand) {
    case Subcommand::Simulate:
    case Subcommand::Track:
    case Subcommand::Decorrelate: return partial(cli, cfg);
    case Subcommand::Refilter: return full(cli, cfg);
    case Subcommand::Compare: return compare(cli, cfg);
    case Subcommand::Reproduce: {
      CommandResult r = reproduce(cli, cfg);
      for (const auto& c : r.checks)
        if (!c.pass)
          throw scenario::StageError(ErrorKind::Numerical, "check",
                                     fmt::format("{} {}: {:.6g} vs threshold {:g}",
                                                 to_string(cli.figure), c.name, c.value, c.threshold));
      return r;
    }
  }
  return {};
}

ErrorGap max_error_gap(const scenario::MetricsSummary& metrics, double start) {
  ErrorGap gap;
  for (const auto& e : metrics.per_epoch) {
    if (e.epoch < start) continue;
    gap.position = std::max(gap.position, std::abs(e.refiltered.pos_err_norm - e.source.pos_err_norm) /
                                              e.source.pos_sigma_rss);
    gap.velocity = std::max(gap.velocity, std::abs(e.refiltered.vel_err_norm - e.source.vel_err_norm) /
                                              e.source.vel_sigma_rss);
  }
  return gap;
}

double ssem_coverage(const scenario::RunReport& report, int axis, double k) {
  std::size_t total = 0, inside = 0;
  for (const auto& e : report.epochs) {
    if (!e.ssem || e.ssem->z.size() <= axis) continue;
    ++total;
    if (std::abs(e.ssem->z(axis) - e.truth(axis)) <= k * std::sqrt(e.ssem->cov(axis, axis))) ++inside;
  }
  return total ? static_cast<double>(inside) / static_cast<double>(total) : 0.0;
}

}  // namespace retrofilter::app
