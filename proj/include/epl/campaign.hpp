#pragma once

// Campaign harness: strict JSON configuration parsing, the six runnable
// experiments (rates-sweep, fringe, tomo, chsh, teleport, table-row), and
// deterministic artifact emission.  Exit codes: 0 success, 2 configuration
// error, 3 numerical non-convergence.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "epl/analysis.hpp"
#include "epl/counts.hpp"
#include "epl/errors.hpp"
#include "epl/format.hpp"
#include "epl/io.hpp"
#include "epl/polcalc.hpp"
#include "epl/rng.hpp"
#include "epl/source.hpp"
#include "epl/teleport.hpp"

namespace epl::harness {

using io::ordered_json;
using source::SourceConfig;

// ---------------------------------------------------------------------------
// Experiments and angle conventions
// ---------------------------------------------------------------------------

enum class Experiment { rates_sweep, fringe, tomo, chsh, teleport, table_row };

inline std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::rates_sweep: return "rates-sweep";
    case Experiment::fringe: return "fringe";
    case Experiment::tomo: return "tomo";
    case Experiment::chsh: return "chsh";
    case Experiment::teleport: return "teleport";
    case Experiment::table_row: return "table-row";
  }
  throw std::logic_error("experiment_name: bad enum");
}

// The config-file block name for an experiment ('-' becomes '_').
inline std::string experiment_block(Experiment e) {
  std::string n = experiment_name(e);
  for (char& c : n)
    if (c == '-') c = '_';
  return n;
}

inline Experiment parse_experiment(std::string_view name) {
  for (Experiment e : {Experiment::rates_sweep, Experiment::fringe, Experiment::tomo,
                       Experiment::chsh, Experiment::teleport, Experiment::table_row})
    if (name == experiment_name(e) || name == experiment_block(e)) return e;
  throw ConfigError("unknown experiment '" + std::string(name) +
                    "' (expected rates-sweep, fringe, tomo, chsh, teleport, or table-row)");
}

// Analyzer angles can be stated on three scales: `bloch` (the equatorial
// Bloch-plane angle theta with |psi> = cos(theta/2)|H> + sin(theta/2)|V>,
// fringe period 360), `state` (the polarization-plane angle theta_p =
// theta/2, period 180; H=0, D=45, V=90, A=135), or `hwp` (the physical
// half-wave-plate angle theta/4, period 90).
enum class AngleConvention { bloch, state, hwp };

inline std::string angle_convention_name(AngleConvention c) {
  switch (c) {
    case AngleConvention::bloch: return "bloch";
    case AngleConvention::state: return "state";
    case AngleConvention::hwp: return "hwp";
  }
  throw std::logic_error("angle_convention_name: bad enum");
}

inline AngleConvention parse_angle_convention(std::string_view name) {
  if (name == "bloch") return AngleConvention::bloch;
  if (name == "state") return AngleConvention::state;
  if (name == "hwp") return AngleConvention::hwp;
  throw ConfigError("unknown angle_convention '" + std::string(name) +
                    "' (expected bloch, state, or hwp)");
}

inline double bloch_factor(AngleConvention c) {
  switch (c) {
    case AngleConvention::bloch: return 1.0;
    case AngleConvention::state: return 2.0;
    case AngleConvention::hwp: return 4.0;
  }
  throw std::logic_error("bloch_factor: bad enum");
}

inline double to_bloch(AngleConvention c, double angle_deg) {
  return bloch_factor(c) * angle_deg;
}

// Fringe period in the convention's own units.
inline double fringe_period(AngleConvention c) { return 360.0 / bloch_factor(c); }

// ---------------------------------------------------------------------------
// Per-experiment parameters
// ---------------------------------------------------------------------------

struct RatesSweepParams {
  std::vector<double> powers_mw = {0.2, 0.4, 0.6, 0.8, 1.0,  1.6,
                                   1.8, 3.1, 5.0, 7.0, 10.2, 14.3};
  double duration_s = 1.0;
};

struct FringeParams {
  AngleConvention convention = AngleConvention::state;
  std::vector<double> theta_s_deg = {0.0, 45.0, 90.0, 135.0};
  double theta_i_start_deg = 0.0;
  double theta_i_stop_deg = 180.0;
  double theta_i_step_deg = 10.0;
  double duration_s = 1.0;
};

struct TomoParams {
  int settings = 36;
  double duration_s = 1.4;
  int bootstrap_resamples = 100;
  int max_iterations = 5000;
};

struct ChshParams {
  AngleConvention convention = AngleConvention::bloch;
  analysis::ChshAngles angles{};  // (theta_s, theta_s', theta_i, theta_i')
  double duration_s = 1.42;
  int bootstrap_resamples = 1000;
};

struct TeleportParams {
  std::vector<std::string> inputs = {"H", "V", "D", "R"};
  double bsm_visibility = 6.0 / 7.0;
  teleport::Convention convention = teleport::Convention::paper;
  std::optional<std::array<std::string, 4>> correction_table{};  // phi+, phi-, psi+, psi-
};

struct TableRowParams {};

struct CampaignConfig {
  int schema_version = 1;
  std::optional<Experiment> experiment{};
  bool has_seed = false;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  SourceConfig source{};
  RatesSweepParams rates_sweep{};
  FringeParams fringe{};
  TomoParams tomo{};
  ChshParams chsh{};
  TeleportParams teleport{};
  TableRowParams table_row{};
};

// ---------------------------------------------------------------------------
// Strict JSON parsing
// ---------------------------------------------------------------------------

namespace detail {

// Wraps one JSON object; every getter records its key, and done() rejects
// anything left over, so misspelled fields fail loudly with their full path.
class Obj {
 public:
  Obj(const ordered_json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  const std::string& path() const { return path_; }

  bool has(const char* key) const { return j_.contains(key); }

  double number(const char* key, std::optional<double> fallback = {}) {
    const ordered_json* v = fetch(key, fallback.has_value());
    if (!v) return *fallback;
    if (!v->is_number()) throw ConfigError(at(key) + ": expected a number");
    return v->get<double>();
  }

  int integer(const char* key, std::optional<int> fallback = {}) {
    const ordered_json* v = fetch(key, fallback.has_value());
    if (!v) return *fallback;
    if (!v->is_number_integer()) throw ConfigError(at(key) + ": expected an integer");
    return v->get<int>();
  }

  std::uint64_t uinteger(const char* key, std::optional<std::uint64_t> fallback = {}) {
    const ordered_json* v = fetch(key, fallback.has_value());
    if (!v) return *fallback;
    if (!v->is_number_integer() || (v->is_number_integer() && v->get<std::int64_t>() < 0 &&
                                    !v->is_number_unsigned()))
      throw ConfigError(at(key) + ": expected a non-negative integer");
    return v->get<std::uint64_t>();
  }

  std::string string(const char* key, std::optional<std::string> fallback = {}) {
    const ordered_json* v = fetch(key, fallback.has_value());
    if (!v) return *fallback;
    if (!v->is_string()) throw ConfigError(at(key) + ": expected a string");
    return v->get<std::string>();
  }

  std::vector<double> number_array(const char* key, std::optional<std::vector<double>> fallback = {}) {
    const ordered_json* v = fetch(key, fallback.has_value());
    if (!v) return *fallback;
    if (!v->is_array()) throw ConfigError(at(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : *v) {
      if (!e.is_number()) throw ConfigError(at(key) + ": expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<std::string> string_array(const char* key,
                                        std::optional<std::vector<std::string>> fallback = {}) {
    const ordered_json* v = fetch(key, fallback.has_value());
    if (!v) return *fallback;
    if (!v->is_array()) throw ConfigError(at(key) + ": expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : *v) {
      if (!e.is_string()) throw ConfigError(at(key) + ": expected an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  // Child object; returns nullopt when absent.
  std::optional<Obj> object(const char* key) {
    const ordered_json* v = fetch(key, /*optional=*/true);
    if (!v) return std::nullopt;
    return Obj(*v, at(key));
  }

  void done() const {
    for (const auto& item : j_.items())
      if (!consumed_.contains(item.key()))
        throw ConfigError(at(item.key().c_str()) + ": unknown field");
  }

 private:
  std::string at(const char* key) const { return path_ + "." + key; }

  const ordered_json* fetch(const char* key, bool optional) {
    consumed_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) {
      if (optional) return nullptr;
      throw ConfigError(at(key) + ": required field missing");
    }
    return &*it;
  }

  const ordered_json& j_;
  std::string path_;
  std::set<std::string> consumed_;
};

inline SourceConfig parse_source(Obj obj) {
  SourceConfig base{};
  SourceConfig cfg{};
  cfg.pump_power_mw = obj.number("pump_power_mw", base.pump_power_mw);
  cfg.pgr_per_mw = obj.number("pgr_per_mw", base.pgr_per_mw);
  cfg.coincidence_per_mw = obj.number("coincidence_per_mw", base.coincidence_per_mw);
  cfg.eta_signal = obj.number("eta_signal", base.eta_signal);
  cfg.eta_idler = obj.number("eta_idler", base.eta_idler);
  cfg.dark_signal = obj.number("dark_signal", base.dark_signal);
  cfg.dark_idler = obj.number("dark_idler", base.dark_idler);
  cfg.coincidence_window_s = obj.number("coincidence_window_s", base.coincidence_window_s);
  cfg.imbalance_alpha_rad = obj.number("imbalance_alpha_rad", base.imbalance_alpha_rad);
  cfg.phase_phi_rad = obj.number("phase_phi_rad", base.phase_phi_rad);
  cfg.dephasing_d = obj.number("dephasing_d", base.dephasing_d);
  cfg.white_noise_w = obj.number("white_noise_w", base.white_noise_w);
  obj.done();
  cfg.validate();
  return cfg;
}

inline RatesSweepParams parse_rates_sweep(Obj obj) {
  RatesSweepParams p{};
  p.powers_mw = obj.number_array("powers_mw", p.powers_mw);
  p.duration_s = obj.number("duration_s", p.duration_s);
  obj.done();
  if (p.powers_mw.size() < 2)
    throw ConfigError(obj.path() + ".powers_mw: need at least 2 pump powers");
  for (double v : p.powers_mw)
    if (!(std::isfinite(v) && v >= 0.0))
      throw ConfigError(obj.path() + ".powers_mw: powers must be finite and >= 0");
  if (!(std::isfinite(p.duration_s) && p.duration_s > 0.0))
    throw ConfigError(obj.path() + ".duration_s: must be > 0");
  return p;
}

inline FringeParams parse_fringe(Obj obj) {
  FringeParams p{};
  p.convention = parse_angle_convention(
      obj.string("angle_convention", angle_convention_name(p.convention)));
  p.theta_s_deg = obj.number_array("theta_s_deg", p.theta_s_deg);
  p.theta_i_start_deg = obj.number("theta_i_start_deg", p.theta_i_start_deg);
  p.theta_i_stop_deg = obj.number("theta_i_stop_deg", p.theta_i_stop_deg);
  p.theta_i_step_deg = obj.number("theta_i_step_deg", p.theta_i_step_deg);
  p.duration_s = obj.number("duration_s", p.duration_s);
  obj.done();
  if (p.theta_s_deg.empty())
    throw ConfigError(obj.path() + ".theta_s_deg: need at least 1 signal angle");
  if (!(std::isfinite(p.theta_i_step_deg) && p.theta_i_step_deg > 0.0))
    throw ConfigError(obj.path() + ".theta_i_step_deg: must be > 0");
  if (!(p.theta_i_stop_deg >= p.theta_i_start_deg))
    throw ConfigError(obj.path() + ".theta_i_stop_deg: must be >= theta_i_start_deg");
  if (!(std::isfinite(p.duration_s) && p.duration_s > 0.0))
    throw ConfigError(obj.path() + ".duration_s: must be > 0");
  return p;
}

inline TomoParams parse_tomo(Obj obj) {
  TomoParams p{};
  p.settings = obj.integer("settings", p.settings);
  p.duration_s = obj.number("duration_s", p.duration_s);
  p.bootstrap_resamples = obj.integer("bootstrap_resamples", p.bootstrap_resamples);
  p.max_iterations = obj.integer("max_iterations", p.max_iterations);
  obj.done();
  if (p.settings != 36 && p.settings != 16)
    throw ConfigError(obj.path() + ".settings: must be 36 or 16");
  if (!(std::isfinite(p.duration_s) && p.duration_s > 0.0))
    throw ConfigError(obj.path() + ".duration_s: must be > 0");
  if (p.bootstrap_resamples < 0)
    throw ConfigError(obj.path() + ".bootstrap_resamples: must be >= 0");
  if (p.max_iterations < 1) throw ConfigError(obj.path() + ".max_iterations: must be >= 1");
  return p;
}

inline ChshParams parse_chsh(Obj obj) {
  ChshParams p{};
  p.convention = parse_angle_convention(
      obj.string("angle_convention", angle_convention_name(p.convention)));
  const std::vector<double> default_angles = {p.angles.theta_s / bloch_factor(p.convention),
                                              p.angles.theta_s_prime / bloch_factor(p.convention),
                                              p.angles.theta_i / bloch_factor(p.convention),
                                              p.angles.theta_i_prime / bloch_factor(p.convention)};
  const auto a = obj.number_array("angles_deg", default_angles);
  p.duration_s = obj.number("duration_s", p.duration_s);
  p.bootstrap_resamples = obj.integer("bootstrap_resamples", p.bootstrap_resamples);
  obj.done();
  if (a.size() != 4)
    throw ConfigError(obj.path() +
                      ".angles_deg: expected [theta_s, theta_s_prime, theta_i, theta_i_prime]");
  for (double v : a)
    if (!std::isfinite(v)) throw ConfigError(obj.path() + ".angles_deg: angles must be finite");
  p.angles.theta_s = to_bloch(p.convention, a[0]);
  p.angles.theta_s_prime = to_bloch(p.convention, a[1]);
  p.angles.theta_i = to_bloch(p.convention, a[2]);
  p.angles.theta_i_prime = to_bloch(p.convention, a[3]);
  if (!(std::isfinite(p.duration_s) && p.duration_s > 0.0))
    throw ConfigError(obj.path() + ".duration_s: must be > 0");
  if (p.bootstrap_resamples < 0)
    throw ConfigError(obj.path() + ".bootstrap_resamples: must be >= 0");
  return p;
}

inline TeleportParams parse_teleport(Obj obj) {
  TeleportParams p{};
  p.inputs = obj.string_array("inputs", p.inputs);
  p.bsm_visibility = obj.number("bsm_visibility", p.bsm_visibility);
  p.convention = teleport::parse_convention(
      obj.string("convention", teleport::convention_name(p.convention)));
  if (auto table = obj.object("correction_table")) {
    std::array<std::string, 4> words;
    words[0] = table->string("phi+");
    words[1] = table->string("phi-");
    words[2] = table->string("psi+");
    words[3] = table->string("psi-");
    table->done();
    p.correction_table = words;
  }
  obj.done();
  if (p.inputs.empty()) throw ConfigError(obj.path() + ".inputs: need at least 1 input state");
  if (!(std::isfinite(p.bsm_visibility) && p.bsm_visibility >= 0.0 && p.bsm_visibility <= 1.0))
    throw ConfigError(obj.path() + ".bsm_visibility: must lie in [0, 1]");
  return p;
}

}  // namespace detail

// Parse a campaign configuration, enforcing the schema for `expected`:
// unknown fields anywhere are errors, as is a config whose own `experiment`
// field names a different experiment.
inline CampaignConfig parse_campaign_config(const ordered_json& j, Experiment expected) {
  detail::Obj root(j, "config");
  CampaignConfig cfg;
  cfg.schema_version = root.integer("schema_version");
  if (cfg.schema_version != 1)
    throw ConfigError("config.schema_version: unsupported version " +
                      std::to_string(cfg.schema_version) + " (this build reads version 1)");
  if (root.has("experiment")) {
    cfg.experiment = parse_experiment(root.string("experiment"));
    if (*cfg.experiment != expected)
      throw ConfigError("config.experiment: file says '" + experiment_name(*cfg.experiment) +
                        "' but '" + experiment_name(expected) + "' was requested");
  } else {
    root.string("experiment", "");  // mark consumed for done()
  }
  if (root.has("seed")) {
    cfg.seed = root.uinteger("seed");
    cfg.has_seed = true;
  } else {
    root.uinteger("seed", 0);
  }
  cfg.out_dir = root.string("out_dir", cfg.out_dir);
  if (auto src = root.object("source")) cfg.source = detail::parse_source(std::move(*src));

  const std::string block = experiment_block(expected);
  auto params = root.object(block.c_str());
  switch (expected) {
    case Experiment::rates_sweep:
      if (params) cfg.rates_sweep = detail::parse_rates_sweep(std::move(*params));
      break;
    case Experiment::fringe:
      if (params) cfg.fringe = detail::parse_fringe(std::move(*params));
      break;
    case Experiment::tomo:
      if (params) cfg.tomo = detail::parse_tomo(std::move(*params));
      break;
    case Experiment::chsh:
      if (params) cfg.chsh = detail::parse_chsh(std::move(*params));
      break;
    case Experiment::teleport:
      if (params) cfg.teleport = detail::parse_teleport(std::move(*params));
      break;
    case Experiment::table_row:
      if (params) params->done();
      break;
  }
  root.done();
  return cfg;
}

// ---------------------------------------------------------------------------
// Result schemas
// ---------------------------------------------------------------------------

struct TableRow {
  double pgr_per_mw = 0.0;
  double coincidence_per_mw = 0.0;
  double fidelity = 0.0;
  double symmetric_heralding = 0.0;
};

inline TableRow make_table_row(const SourceConfig& cfg) {
  cfg.validate();
  TableRow row;
  row.pgr_per_mw = cfg.pgr_per_mw;
  row.coincidence_per_mw = cfg.coincidence_per_mw;
  row.fidelity = source::fidelity_to_target(cfg);
  row.symmetric_heralding = counts::symmetric_heralding(cfg.coincidence_per_mw, cfg.pgr_per_mw);
  return row;
}

inline ordered_json table_row_to_json(const TableRow& r) {
  ordered_json j;
  j["pgr_per_mw"] = r.pgr_per_mw;
  j["coincidence_per_mw"] = r.coincidence_per_mw;
  j["fidelity"] = r.fidelity;
  j["symmetric_heralding"] = r.symmetric_heralding;
  return j;
}

inline TableRow table_row_from_json(const ordered_json& j) {
  return {j.at("pgr_per_mw").get<double>(), j.at("coincidence_per_mw").get<double>(),
          j.at("fidelity").get<double>(), j.at("symmetric_heralding").get<double>()};
}

inline ordered_json linear_fit_to_json(const counts::LinearFit& f) {
  ordered_json j;
  j["slope_per_mw"] = f.slope;
  j["intercept"] = f.intercept;
  j["r_squared"] = f.r_squared;
  return j;
}

inline counts::LinearFit linear_fit_from_json(const ordered_json& j) {
  return {j.at("slope_per_mw").get<double>(), j.at("intercept").get<double>(),
          j.at("r_squared").get<double>()};
}

struct RatesFitReport {
  counts::LinearFit coincidence_rate;
  counts::LinearFit pair_generation_rate;
};

inline ordered_json rates_fit_to_json(const RatesFitReport& r) {
  ordered_json j;
  j["coincidence_rate"] = linear_fit_to_json(r.coincidence_rate);
  j["pair_generation_rate"] = linear_fit_to_json(r.pair_generation_rate);
  return j;
}

inline RatesFitReport rates_fit_from_json(const ordered_json& j) {
  return {linear_fit_from_json(j.at("coincidence_rate")),
          linear_fit_from_json(j.at("pair_generation_rate"))};
}

struct FringeCurve {
  double theta_s = 0.0;  // configured units
  double c_max = 0.0;
  double c_min = 0.0;
  double phase_deg = 0.0;
  double visibility = 0.0;
};

struct FringeFitReport {
  AngleConvention convention = AngleConvention::state;
  double period_deg = 180.0;
  std::vector<FringeCurve> curves;
};

inline ordered_json fringe_fit_to_json(const FringeFitReport& r) {
  ordered_json j;
  j["angle_convention"] = angle_convention_name(r.convention);
  j["period_deg"] = r.period_deg;
  ordered_json curves = ordered_json::array();
  for (const auto& c : r.curves) {
    ordered_json e;
    e["theta_s"] = c.theta_s;
    e["c_max"] = c.c_max;
    e["c_min"] = c.c_min;
    e["phase_deg"] = c.phase_deg;
    e["visibility"] = c.visibility;
    curves.push_back(std::move(e));
  }
  j["curves"] = std::move(curves);
  return j;
}

inline FringeFitReport fringe_fit_from_json(const ordered_json& j) {
  FringeFitReport r;
  r.convention = parse_angle_convention(j.at("angle_convention").get<std::string>());
  r.period_deg = j.at("period_deg").get<double>();
  for (const auto& e : j.at("curves"))
    r.curves.push_back({e.at("theta_s").get<double>(), e.at("c_max").get<double>(),
                        e.at("c_min").get<double>(), e.at("phase_deg").get<double>(),
                        e.at("visibility").get<double>()});
  return r;
}

inline ordered_json tomo_result_to_json(const analysis::TomoResult& r) {
  ordered_json j;
  j["fidelity_to_target"] = r.fidelity_to_target;
  j["fidelity_sigma"] = r.fidelity_sigma;
  j["purity"] = r.purity;
  j["log_likelihood"] = r.log_likelihood;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["likelihood_monotone"] = r.likelihood_monotone;
  j["rho"] = io::density_to_json(r.rho.density());
  return j;
}

inline analysis::TomoResult tomo_result_from_json(const ordered_json& j) {
  analysis::TomoResult r;
  r.rho = polcalc::PolState::mixed(io::density_from_json(j.at("rho")));
  r.fidelity_to_target = j.at("fidelity_to_target").get<double>();
  r.fidelity_sigma = j.at("fidelity_sigma").get<double>();
  r.purity = j.at("purity").get<double>();
  r.log_likelihood = j.at("log_likelihood").get<double>();
  r.iterations = j.at("iterations").get<int>();
  r.converged = j.at("converged").get<bool>();
  r.likelihood_monotone = j.at("likelihood_monotone").get<bool>();
  return r;
}

inline ordered_json chsh_result_to_json(const analysis::ChshResult& r) {
  ordered_json j;
  j["angles_deg"] = ordered_json::array(
      {r.angles.theta_s, r.angles.theta_s_prime, r.angles.theta_i, r.angles.theta_i_prime});
  j["S"] = r.S;
  j["sigma"] = r.sigma;
  if (r.sigmas_above_2)
    j["sigmas_above_2"] = *r.sigmas_above_2;
  else
    j["sigmas_above_2"] = nullptr;
  j["n_resamples"] = r.n_resamples;
  return j;
}

inline analysis::ChshResult chsh_result_from_json(const ordered_json& j) {
  analysis::ChshResult r;
  const auto& a = j.at("angles_deg");
  r.angles.theta_s = a.at(0).get<double>();
  r.angles.theta_s_prime = a.at(1).get<double>();
  r.angles.theta_i = a.at(2).get<double>();
  r.angles.theta_i_prime = a.at(3).get<double>();
  r.S = j.at("S").get<double>();
  r.sigma = j.at("sigma").get<double>();
  if (!j.at("sigmas_above_2").is_null()) r.sigmas_above_2 = j.at("sigmas_above_2").get<double>();
  r.n_resamples = j.at("n_resamples").get<int>();
  return r;
}

inline ordered_json teleport_report_to_json(const teleport::TeleportReport& r) {
  ordered_json j;
  j["convention"] = teleport::convention_name(r.convention);
  j["bsm_visibility"] = r.bsm_visibility;
  ordered_json outcomes = ordered_json::array();
  for (polcalc::Bell b : polcalc::kBellOrder) outcomes.push_back(polcalc::bell_name(b));
  j["outcomes"] = std::move(outcomes);
  j["inputs"] = r.inputs;
  ordered_json cells = ordered_json::array();
  for (const auto& row : r.cells) {
    ordered_json jrow = ordered_json::array();
    for (const auto& cell : row) {
      ordered_json c;
      c["outcome"] = polcalc::bell_name(cell.outcome);
      c["probability"] = cell.probability;
      c["fidelity"] = cell.fidelity;
      jrow.push_back(std::move(c));
    }
    cells.push_back(std::move(jrow));
  }
  j["cells"] = std::move(cells);
  j["input_fidelity"] = r.input_fidelity;
  j["average_fidelity"] = r.average_fidelity;
  return j;
}

inline teleport::TeleportReport teleport_report_from_json(const ordered_json& j) {
  teleport::TeleportReport r;
  r.convention = teleport::parse_convention(j.at("convention").get<std::string>());
  r.bsm_visibility = j.at("bsm_visibility").get<double>();
  r.inputs = j.at("inputs").get<std::vector<std::string>>();
  for (const auto& jrow : j.at("cells")) {
    std::array<teleport::TeleportCell, 4> row{};
    std::size_t k = 0;
    for (const auto& c : jrow) {
      if (k >= 4) throw std::runtime_error("teleport_report_from_json: too many cells in a row");
      row[k++] = {polcalc::parse_bell(c.at("outcome").get<std::string>()),
                  c.at("probability").get<double>(), c.at("fidelity").get<double>()};
    }
    r.cells.push_back(row);
  }
  r.input_fidelity = j.at("input_fidelity").get<std::vector<double>>();
  r.average_fidelity = j.at("average_fidelity").get<double>();
  return r;
}

// ---------------------------------------------------------------------------
// Experiment runners
// ---------------------------------------------------------------------------

struct CampaignResult {
  std::vector<std::filesystem::path> files;
  std::string summary;
};

namespace detail {

inline std::filesystem::path emit(const std::filesystem::path& dir, const std::string& name,
                                  std::string_view content, CampaignResult& result) {
  const auto path = dir / name;
  io::write_file(path, content);
  result.files.push_back(path);
  return path;
}

inline double sinusoid_value(const counts::SinusoidFit& fit, double angle_deg, double period_deg) {
  const double w = 2.0 * std::numbers::pi / period_deg;
  return fit.offset + fit.amplitude * std::cos(w * (angle_deg - fit.phase_deg));
}

}  // namespace detail

inline CampaignResult run_rates_sweep(const CampaignConfig& cfg, const std::filesystem::path& out) {
  const auto& p = cfg.rates_sweep;
  const std::vector<counts::CountSetting> settings = {counts::CountSetting::computational()};

  CampaignResult result;
  std::vector<io::RatesRow> fig2a;
  std::vector<io::HeraldingRow> fig2b;
  std::vector<io::PgrRow> fig2c;
  std::vector<double> powers, c_rates, pgr_powers, pgr_rates;
  for (std::size_t k = 0; k < p.powers_mw.size(); ++k) {
    SourceConfig src = cfg.source;
    src.pump_power_mw = p.powers_mw[k];
    const auto recs = counts::simulate_counts(src, settings, p.duration_s, rng::derive(cfg.seed, k));
    const auto& rec = recs[0];
    fig2a.push_back({src.pump_power_mw, rec.n_signal, rec.n_idler, rec.n_coinc});
    const double ns = static_cast<double>(rec.n_signal) / p.duration_s;
    const double ni = static_cast<double>(rec.n_idler) / p.duration_s;
    const double c = static_cast<double>(rec.n_coinc) / p.duration_s;
    powers.push_back(src.pump_power_mw);
    c_rates.push_back(c);
    if (ns > 0.0 && ni > 0.0) {
      fig2b.push_back({src.pump_power_mw, counts::heralding(c, ni), counts::heralding(c, ns)});
      if (c > 0.0) {
        fig2c.push_back({src.pump_power_mw, counts::pgr(ns, ni, c)});
        pgr_powers.push_back(src.pump_power_mw);
        pgr_rates.push_back(counts::pgr(ns, ni, c));
      }
    }
  }
  RatesFitReport fits;
  fits.coincidence_rate = counts::linear_fit(powers, c_rates);
  if (pgr_rates.size() < 2)
    throw NonConvergence("rates-sweep: too few nonzero points to fit the pair generation rate");
  fits.pair_generation_rate = counts::linear_fit(pgr_powers, pgr_rates);

  detail::emit(out, "fig2a.csv", io::rates_csv(fig2a), result);
  detail::emit(out, "fig2b.csv", io::heralding_csv(fig2b), result);
  detail::emit(out, "fig2c.csv", io::pgr_csv(fig2c), result);
  detail::emit(out, "rates_fit.json", io::dump_json(rates_fit_to_json(fits)), result);
  result.summary = "rates-sweep: coincidence slope " + format_double(fits.coincidence_rate.slope) +
                   " /s/mW, pair-generation slope " +
                   format_double(fits.pair_generation_rate.slope) + " /s/mW\n";
  return result;
}

inline CampaignResult run_fringe(const CampaignConfig& cfg, const std::filesystem::path& out) {
  const auto& p = cfg.fringe;
  std::vector<double> grid;  // idler angles in configured units
  for (double ti = p.theta_i_start_deg; ti <= p.theta_i_stop_deg + 1e-9; ti += p.theta_i_step_deg)
    grid.push_back(ti);
  if (grid.size() < 4)
    throw ConfigError("fringe: idler grid needs at least 4 angles for the sinusoid fit");

  const double period = fringe_period(p.convention);
  CampaignResult result;
  std::vector<io::FringeRow> rows;
  FringeFitReport report;
  report.convention = p.convention;
  report.period_deg = period;
  std::string summary = "fringe:";
  for (std::size_t s = 0; s < p.theta_s_deg.size(); ++s) {
    const double ts = p.theta_s_deg[s];
    std::vector<counts::CountSetting> settings;
    settings.reserve(grid.size());
    for (double ti : grid)
      settings.push_back(counts::CountSetting::analyzers(
          "s" + format_double(ts) + "_i" + format_double(ti), to_bloch(p.convention, ts),
          to_bloch(p.convention, ti)));
    const auto records =
        counts::simulate_counts(cfg.source, settings, p.duration_s, rng::derive(cfg.seed, s));
    std::vector<double> observed;
    observed.reserve(records.size());
    for (const auto& r : records) observed.push_back(static_cast<double>(r.n_coinc));
    const auto fit = counts::sin_fit(grid, observed, period);
    for (std::size_t k = 0; k < grid.size(); ++k)
      rows.push_back({ts, grid[k], records[k].n_coinc, detail::sinusoid_value(fit, grid[k], period)});
    report.curves.push_back({ts, fit.c_max, fit.c_min, fit.phase_deg, fit.visibility});
    summary += " V(" + format_double(ts) + ")=" + format_double(fit.visibility);
  }
  detail::emit(out, "fig3c.csv", io::fringe_csv(rows), result);
  detail::emit(out, "fringe_fits.json", io::dump_json(fringe_fit_to_json(report)), result);
  result.summary = summary + "\n";
  return result;
}

inline CampaignResult run_tomo(const CampaignConfig& cfg, const std::filesystem::path& out) {
  const auto& p = cfg.tomo;
  const auto settings = analysis::tomo_settings(p.settings);
  const auto count_settings = analysis::tomo_count_settings(settings);
  const auto records =
      counts::simulate_counts(cfg.source, count_settings, p.duration_s, rng::derive(cfg.seed, 1));
  const auto data = analysis::make_setting_counts(settings, records);

  analysis::TomoOptions opts;
  opts.max_iterations = p.max_iterations;
  analysis::TomoResult base = analysis::mle_reconstruct(data, polcalc::bell(polcalc::Bell::PhiPlus), opts);

  if (p.bootstrap_resamples >= 2) {
    const Mat warm_start = base.rho.density();
    const auto stats = analysis::bootstrap(
        records,
        [&](std::span<const counts::CountRecord> resampled) {
          const auto d = analysis::make_setting_counts(settings, resampled);
          return analysis::mle_reconstruct(d, warm_start, polcalc::bell(polcalc::Bell::PhiPlus), opts)
              .fidelity_to_target;
        },
        p.bootstrap_resamples, rng::derive(cfg.seed, 2));
    base.fidelity_sigma = stats.sigma;
  }

  CampaignResult result;
  detail::emit(out, "tomo_counts.csv", io::count_records_csv(records), result);
  ordered_json settings_json;
  ordered_json list = ordered_json::array();
  for (const auto& s : settings) {
    ordered_json e;
    e["label"] = s.label;
    e["hwp_s_deg"] = s.hwp_s_deg;
    e["qwp_s_deg"] = s.qwp_s_deg;
    e["hwp_i_deg"] = s.hwp_i_deg;
    e["qwp_i_deg"] = s.qwp_i_deg;
    list.push_back(std::move(e));
  }
  settings_json["settings"] = std::move(list);
  detail::emit(out, "tomo_settings.json", io::dump_json(settings_json), result);
  detail::emit(out, "tomo_result.json", io::dump_json(tomo_result_to_json(base)), result);
  result.summary = "tomo: fidelity " + format_double(base.fidelity_to_target) + " +/- " +
                   format_double(base.fidelity_sigma) + ", purity " + format_double(base.purity) +
                   ", " + std::to_string(base.iterations) + " iterations\n";
  if (!base.converged)
    throw NonConvergence("tomo: likelihood ascent did not converge within " +
                         std::to_string(p.max_iterations) + " iterations");
  return result;
}

inline CampaignResult run_chsh(const CampaignConfig& cfg, const std::filesystem::path& out) {
  const auto& p = cfg.chsh;
  const auto settings = analysis::chsh_count_settings(p.angles);
  const auto records =
      counts::simulate_counts(cfg.source, settings, p.duration_s, rng::derive(cfg.seed, 3));
  const auto res = analysis::chsh_result(records, p.angles, p.bootstrap_resamples,
                                         rng::derive(cfg.seed, 4));
  CampaignResult result;
  detail::emit(out, "chsh_counts.csv", io::count_records_csv(records), result);
  detail::emit(out, "chsh_result.json", io::dump_json(chsh_result_to_json(res)), result);
  result.summary = "chsh: S = " + format_double(res.S) + " +/- " + format_double(res.sigma);
  if (res.sigmas_above_2)
    result.summary += " (" + format_double(*res.sigmas_above_2) + " sigma above 2)";
  result.summary += "\n";
  return result;
}

inline CampaignResult run_teleport_campaign(const CampaignConfig& cfg,
                                            const std::filesystem::path& out) {
  const auto& p = cfg.teleport;
  teleport::TeleportConfig tc;
  tc.source = cfg.source;
  tc.bsm_visibility = p.bsm_visibility;
  tc.convention = p.convention;
  tc.inputs.clear();
  for (const auto& name : p.inputs) {
    const auto label = teleport::parse_input(name);
    tc.inputs.emplace_back(teleport::input_name(label), teleport::prepare_input(label));
  }
  if (p.correction_table) {
    teleport::CorrectionTable table = {
        teleport::detail::pauli_word((*p.correction_table)[0]),
        teleport::detail::pauli_word((*p.correction_table)[1]),
        teleport::detail::pauli_word((*p.correction_table)[2]),
        teleport::detail::pauli_word((*p.correction_table)[3])};
    tc.correction_override = table;
  }
  const auto report = teleport::run_teleport(tc);

  CampaignResult result;
  std::vector<io::FidelityMatrixRow> rows;
  for (std::size_t i = 0; i < report.inputs.size(); ++i) {
    const auto& c = report.cells[i];
    rows.push_back({report.inputs[i], c[0].fidelity, c[1].fidelity, c[2].fidelity, c[3].fidelity});
  }
  detail::emit(out, "fig4.csv", io::fidelity_matrix_csv(rows), result);
  detail::emit(out, "teleport_report.json", io::dump_json(teleport_report_to_json(report)), result);
  result.summary = "teleport: average fidelity " + format_double(report.average_fidelity) +
                   " at bsm visibility " + format_double(report.bsm_visibility) + "\n";
  return result;
}

inline CampaignResult run_table_row(const CampaignConfig& cfg, const std::filesystem::path& out) {
  const TableRow row = make_table_row(cfg.source);
  CampaignResult result;
  detail::emit(out, "table_row.json", io::dump_json(table_row_to_json(row)), result);
  result.summary = "table-row: pgr " + format_double(row.pgr_per_mw) + " /s/mW, coincidence " +
                   format_double(row.coincidence_per_mw) + " /s/mW, fidelity " +
                   format_double(row.fidelity) + ", symmetric heralding " +
                   format_double(row.symmetric_heralding) + "\n";
  return result;
}

inline CampaignResult run_campaign(Experiment exp, const CampaignConfig& cfg,
                                   const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  switch (exp) {
    case Experiment::rates_sweep: return run_rates_sweep(cfg, out_dir);
    case Experiment::fringe: return run_fringe(cfg, out_dir);
    case Experiment::tomo: return run_tomo(cfg, out_dir);
    case Experiment::chsh: return run_chsh(cfg, out_dir);
    case Experiment::teleport: return run_teleport_campaign(cfg, out_dir);
    case Experiment::table_row: return run_table_row(cfg, out_dir);
  }
  throw std::logic_error("run_campaign: bad enum");
}

// ---------------------------------------------------------------------------
// CLI entry point
// ---------------------------------------------------------------------------

inline int run_cli(std::string_view experiment_arg, const std::filesystem::path& config_path,
                   std::optional<std::uint64_t> seed_override,
                   std::optional<std::string> out_override, std::ostream& out, std::ostream& err) {
  try {
    const Experiment exp = parse_experiment(experiment_arg);
    if (!std::filesystem::exists(config_path))
      throw ConfigError("config file not found: " + config_path.string());
    ordered_json j;
    try {
      j = io::parse_json(io::read_file(config_path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config is not valid JSON (" + std::string(e.what()) + ")");
    }
    CampaignConfig cfg = parse_campaign_config(j, exp);
    if (seed_override) {
      cfg.seed = *seed_override;
      cfg.has_seed = true;
    }
    if (!cfg.has_seed)
      throw ConfigError("config.seed: required (set it in the config file or pass --seed)");
    const std::filesystem::path out_dir = out_override ? *out_override : cfg.out_dir;
    const CampaignResult result = run_campaign(exp, cfg, out_dir);
    out << result.summary;
    for (const auto& f : result.files) out << "wrote " << f.string() << "\n";
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NonConvergence& e) {
    err << "non-convergence: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace epl::harness
