#include "retrofilter/app/config.hpp"

#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "retrofilter/errors.hpp"

namespace retrofilter::app {
namespace {

using scenario::EtaMode;
using scenario::InitMethod;

[[noreturn]] void config_error(const std::string& source, const YAML::Mark& mark,
                               const std::string& message) {
  if (mark.is_null()) throw Error(ErrorKind::Config, fmt::format("{}: {}", source, message));
  throw Error(ErrorKind::Config,
              fmt::format("{}:{}:{}: {}", source, mark.line + 1, mark.column + 1, message));
}

// One mapping node of the schema. Every key must be claimed before finish().
class Section {
 public:
  Section(const YAML::Node& node, std::string path, const std::string& source, const YAML::Mark& mark)
      : node_(node), path_(std::move(path)), source_(source) {
    if (!node_.IsMap()) config_error(source_, node_.IsDefined() ? node_.Mark() : mark,
                                     fmt::format("'{}' must be a mapping", display()));
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!keys_.emplace(key, kv.first.Mark()).second)
        config_error(source_, kv.first.Mark(), fmt::format("duplicate key '{}'", qualified(key)));
    }
  }

  bool has(const std::string& key) const { return keys_.count(key) > 0; }

  template <typename T>
  void read(const std::string& key, T& target) {
    if (!has(key)) return;
    claimed_.insert(key);
    const YAML::Node value = node_[key];
    if (!value.IsScalar())
      config_error(source_, value.Mark(), fmt::format("'{}' must be a scalar", qualified(key)));
    try {
      target = value.as<T>();
    } catch (const YAML::BadConversion&) {
      config_error(source_, value.Mark(),
                   fmt::format("'{}': cannot convert '{}' to {}", qualified(key), value.Scalar(),
                               type_name<T>()));
    }
  }

  template <typename E>
  void read_enum(const std::string& key, E& target, const std::map<std::string, E>& names) {
    if (!has(key)) return;
    std::string text;
    read(key, text);
    const auto it = names.find(text);
    if (it == names.end()) {
      std::string allowed;
      for (const auto& [name, value] : names) allowed += (allowed.empty() ? "" : ", ") + name;
      config_error(source_, node_[key].Mark(),
                   fmt::format("'{}': unknown value '{}' (expected one of: {})", qualified(key),
                               text, allowed));
    }
    target = it->second;
  }

  std::optional<Section> child(const std::string& key) {
    if (!has(key)) return std::nullopt;
    claimed_.insert(key);
    return Section(node_[key], qualified(key), source_, keys_.at(key));
  }

  YAML::Mark mark_of(const std::string& key) const { return node_[key].Mark(); }
  std::string qualified(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  const std::string& source() const { return source_; }

  void finish() const {
    for (const auto& [key, mark] : keys_) {
      if (claimed_.count(key)) continue;
      config_error(source_, mark,
                   path_.empty() ? fmt::format("unknown key '{}'", key)
                                 : fmt::format("unknown key '{}' in '{}'", key, path_));
    }
  }

 private:
  template <typename T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, double>) return "a number";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else return "a non-negative integer";
  }

  std::string display() const { return path_.empty() ? "<root>" : path_; }

  YAML::Node node_;
  std::string path_;
  std::string source_;
  std::map<std::string, YAML::Mark> keys_;
  std::set<std::string> claimed_;
};

const std::map<std::string, EtaMode> kEtaModes{{"known", EtaMode::Known},
                                               {"estimated", EtaMode::Estimated}};
const std::map<std::string, InitMethod> kInitMethods{
    {"single_detection", InitMethod::SingleDetection}, {"two_point", InitMethod::TwoPoint}};
const std::map<std::string, ekf::CovarianceUpdate> kUpdateForms{
    {"standard", ekf::CovarianceUpdate::Standard}, {"joseph", ekf::CovarianceUpdate::Joseph}};

template <typename E>
std::string enum_name(E value, const std::map<std::string, E>& names) {
  for (const auto& [name, v] : names)
    if (v == value) return name;
  return "?";
}

void read_site(Section& parent, const std::string& key, sensing::GeodeticCoord& site) {
  auto s = parent.child(key);
  if (!s) return;
  s->read("lat_deg", site.lat_deg);
  s->read("lon_deg", site.lon_deg);
  s->read("alt_m", site.alt_m);
  s->finish();
}

void apply(Section& root, AppConfig& cfg) {
  auto& sc = cfg.scenario;
  root.read("seed", sc.seed);

  if (auto s = root.child("trajectory")) {
    read_site(*s, "launch", sc.launch);
    read_site(*s, "impact", sc.impact);
    s->read("flight_time_s", sc.flight_time);
    s->read("integrator_step_s", sc.integrator_step);
    s->finish();
  }

  if (auto s = root.child("radar")) {
    auto& r = sc.radar;
    s->read("bandwidth_hz", r.bandwidth_hz);
    s->read("beamwidth_rad", r.beamwidth_rad);
    s->read("error_slope", r.error_slope);
    if (s->has("ref_snr_db")) {
      double db = 0.0;
      s->read("ref_snr_db", db);
      r.ref_snr = sensing::db_to_linear(db);
    }
    s->read("ref_range_m", r.ref_range_m);
    if (s->has("ref_rcs_dbsm")) {
      double db = 0.0;
      s->read("ref_rcs_dbsm", db);
      r.ref_rcs_m2 = sensing::db_to_linear(db);
    }
    read_site(*s, "site", r.site);
    s->finish();
  }

  if (auto s = root.child("target")) {
    s->read("rcs_m2", sc.target_rcs_m2);
    s->read("meas_rate_hz", sc.meas_rate_hz);
    s->finish();
  }

  if (auto s = root.child("source_filter")) {
    s->read("process_noise", sc.source_eta);
    s->read_enum("init_method", sc.init_method, kInitMethods);
    s->read("init_velocity_sigma", sc.init_velocity_sigma);
    s->read_enum("covariance_update", sc.update_form, kUpdateForms);
    s->finish();
  }

  if (auto s = root.child("decorrelation")) {
    s->read("meas_dim", sc.meas_dim);
    s->read_enum("eta_mode", sc.eta_mode, kEtaModes);
    s->read("eta_median_window", sc.eta_median_window);
    if (auto e = s->child("eta_search")) {
      e->read("eta_init", sc.eta_search.eta_init);
      e->read("eta_max", sc.eta_search.eta_max);
      e->read("rel_tol", sc.eta_search.rel_tol);
      e->read("tol_psd", sc.eta_search.tol_psd_rel);
      e->read("max_iterations", sc.eta_search.max_iterations);
      e->finish();
    }
    s->finish();
  }

  if (auto s = root.child("refilter")) {
    s->read("process_noise", sc.refilter_eta);
    s->finish();
  }

  if (auto s = root.child("metrics")) {
    s->read("window_start_s", sc.metrics_window_start);
    if (s->has("window_end_s")) {
      double end = 0.0;
      s->read("window_end_s", end);
      cfg.window.end = end;
    }
    s->finish();
  }

  if (auto s = root.child("compare")) {
    s->read("runs", cfg.compare.runs);
    s->finish();
  }
  root.finish();
}

void check(const AppConfig& cfg, const std::string& source) {
  const auto& sc = cfg.scenario;
  try {
    sc.validate();
    sc.radar.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, fmt::format("{}: {}", source, e.what()));
  }
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::Config, fmt::format("{}: {}", source, msg));
  };
  const auto& es = sc.eta_search;
  if (!(es.eta_init > 0.0) || !(es.eta_max > es.eta_init))
    fail("decorrelation.eta_search: need 0 < eta_init < eta_max");
  if (!(es.rel_tol > 0.0) || !(es.tol_psd_rel >= 0.0) || es.max_iterations < 1)
    fail("decorrelation.eta_search: rel_tol > 0, tol_psd >= 0 and max_iterations >= 1 required");
  if (sc.eta_median_window < 1) fail("decorrelation.eta_median_window must be >= 1");
  if (cfg.window.end && !(*cfg.window.end > sc.metrics_window_start))
    fail("metrics.window_end_s must exceed metrics.window_start_s");
  if (cfg.compare.runs < 1) fail("compare.runs must be >= 1");
}

}  // namespace

std::vector<std::string> preset_names() { return {"paper_fig3", "paper_fig4"}; }

AppConfig preset_config(const std::string& name) {
  AppConfig cfg;
  cfg.preset = name;
  auto& sc = cfg.scenario;
  sc.launch = {2.0, 5.0, 0.0};
  sc.impact = {10.0, 10.0, 0.0};
  sc.flight_time = 700.0;
  sc.radar = {};
  sc.radar.bandwidth_hz = 100e6;
  sc.radar.beamwidth_rad = 1e-3;
  sc.radar.error_slope = 1.6;
  sc.radar.ref_snr = sensing::db_to_linear(0.0);
  sc.radar.ref_range_m = 2700e3;
  sc.radar.ref_rcs_m2 = sensing::db_to_linear(0.0);
  sc.radar.site = {0.0, 0.0, 0.0};
  sc.source_eta = 0.01;
  sc.eta_mode = EtaMode::Estimated;
  if (name == "paper_fig3") {
    sc.refilter_eta = 0.01;
  } else if (name == "paper_fig4") {
    sc.refilter_eta = 1e-5;
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw Error(ErrorKind::Config, fmt::format("unknown preset '{}' (expected one of: {})", name, known));
  }
  return cfg;
}

AppConfig parse_config_string(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    config_error(source, e.mark, e.msg);
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);

  AppConfig cfg;
  try {
    Section top(root, "", source, YAML::Mark::null_mark());
    if (top.has("preset")) {
      std::string name;
      top.read("preset", name);
      try {
        cfg = preset_config(name);
      } catch (const Error& e) {
        config_error(source, top.mark_of("preset"), fmt::format("'preset': {}", e.what()));
      }
    }
    apply(top, cfg);
  } catch (const YAML::Exception& e) {
    config_error(source, e.mark, e.msg);
  }
  check(cfg, source);
  return cfg;
}

AppConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open config file '{}'", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_string(text.str(), path.string());
}

std::string format_config(const AppConfig& cfg) {
  const auto& sc = cfg.scenario;
  const auto& r = sc.radar;
  auto site = [](const sensing::GeodeticCoord& g) {
    return fmt::format("{{lat_deg: {:.17g}, lon_deg: {:.17g}, alt_m: {:.17g}}}", g.lat_deg,
                       g.lon_deg, g.alt_m);
  };
  std::string out;
  auto line = [&](const std::string& s) { out += s + "\n"; };
  line(fmt::format("seed: {}", sc.seed));
  line("trajectory:");
  line("  launch: " + site(sc.launch));
  line("  impact: " + site(sc.impact));
  line(fmt::format("  flight_time_s: {:.17g}", sc.flight_time));
  line(fmt::format("  integrator_step_s: {:.17g}", sc.integrator_step));
  line("radar:");
  line(fmt::format("  bandwidth_hz: {:.17g}", r.bandwidth_hz));
  line(fmt::format("  beamwidth_rad: {:.17g}", r.beamwidth_rad));
  line(fmt::format("  error_slope: {:.17g}", r.error_slope));
  line(fmt::format("  ref_snr_db: {:.17g}", sensing::linear_to_db(r.ref_snr)));
  line(fmt::format("  ref_range_m: {:.17g}", r.ref_range_m));
  line(fmt::format("  ref_rcs_dbsm: {:.17g}", sensing::linear_to_db(r.ref_rcs_m2)));
  line("  site: " + site(r.site));
  line("target:");
  line(fmt::format("  rcs_m2: {:.17g}", sc.target_rcs_m2));
  line(fmt::format("  meas_rate_hz: {:.17g}", sc.meas_rate_hz));
  line("source_filter:");
  line(fmt::format("  process_noise: {:.17g}", sc.source_eta));
  line("  init_method: " + enum_name(sc.init_method, kInitMethods));
  line(fmt::format("  init_velocity_sigma: {:.17g}", sc.init_velocity_sigma));
  line("  covariance_update: " + enum_name(sc.update_form, kUpdateForms));
  line("decorrelation:");
  line(fmt::format("  meas_dim: {}", sc.meas_dim));
  line("  eta_mode: " + enum_name(sc.eta_mode, kEtaModes));
  line(fmt::format("  eta_median_window: {}", sc.eta_median_window));
  line("  eta_search:");
  line(fmt::format("    eta_init: {:.17g}", sc.eta_search.eta_init));
  line(fmt::format("    eta_max: {:.17g}", sc.eta_search.eta_max));
  line(fmt::format("    rel_tol: {:.17g}", sc.eta_search.rel_tol));
  line(fmt::format("    tol_psd: {:.17g}", sc.eta_search.tol_psd_rel));
  line(fmt::format("    max_iterations: {}", sc.eta_search.max_iterations));
  line("refilter:");
  line(fmt::format("  process_noise: {:.17g}", sc.refilter_eta));
  line("metrics:");
  line(fmt::format("  window_start_s: {:.17g}", sc.metrics_window_start));
  if (cfg.window.end) line(fmt::format("  window_end_s: {:.17g}", *cfg.window.end));
  line("compare:");
  line(fmt::format("  runs: {}", cfg.compare.runs));
  return out;
}

}  // namespace retrofilter::app
