#pragma once

// Physical model of a nondegenerate polarization-entangled pair source.
// The emitted two-photon state is an imbalanced, dephased |phi+> with a
// white-noise admixture standing in for accidental coincidences:
//
//   |psi(alpha, phi)> = cos(pi/4 + alpha)|HH> + e^{i phi} sin(pi/4 + alpha)|VV>
//   rho = (1 - w) D_d[|psi><psi|] + w I/4
//
// where D_d scales the HH-VV coherences by d in [0, 1].  Loss, dark counts,
// and the coincidence window enter the counting model (counts.hpp), not the
// state itself.

#include <cmath>
#include <numbers>
#include <string>

#include "epl/errors.hpp"
#include "epl/polcalc.hpp"

namespace epl::source {

using polcalc::PolState;

// Calibration and noise knobs for one source configuration.  The defaults
// are the calibrated reference operating point: 8.2e5 generated pairs/s/mW,
// 3.0e4 detected pairs/s/mW, symmetric arm efficiency 0.191, and a
// white-noise weight that puts the state fidelity at 0.985.
struct SourceConfig {
  double pump_power_mw = 1.0;
  double pgr_per_mw = 8.2e5;          // pairs/s/mW generated at the crystal
  double coincidence_per_mw = 3.0e4;  // detected pairs/s/mW (cross-check value)
  double eta_signal = 0.191;          // total detection efficiency, signal arm
  double eta_idler = 0.191;           // total detection efficiency, idler arm
  double dark_signal = 0.0;           // dark counts/s, signal detector
  double dark_idler = 0.0;            // dark counts/s, idler detector
  double coincidence_window_s = 1e-9;
  double imbalance_alpha_rad = 0.0;   // pump-split deviation from balanced
  double phase_phi_rad = 0.0;         // HH-VV relative phase
  double dephasing_d = 1.0;           // coherence scaling in [0, 1]
  double white_noise_w = 0.02;        // I/4 admixture weight in [0, 1]

  void validate() const {
    const auto bad = [](const std::string& field, const std::string& why) {
      throw ConfigError("source." + field + ": " + why);
    };
    const auto nonneg = [&](const char* field, double v) {
      if (!(std::isfinite(v) && v >= 0.0)) bad(field, "must be finite and >= 0");
    };
    const auto unit = [&](const char* field, double v) {
      if (!(std::isfinite(v) && v >= 0.0 && v <= 1.0)) bad(field, "must lie in [0, 1]");
    };
    nonneg("pump_power_mw", pump_power_mw);
    nonneg("pgr_per_mw", pgr_per_mw);
    nonneg("coincidence_per_mw", coincidence_per_mw);
    if (coincidence_per_mw > pgr_per_mw)
      bad("coincidence_per_mw", "cannot exceed pgr_per_mw");
    unit("eta_signal", eta_signal);
    unit("eta_idler", eta_idler);
    nonneg("dark_signal", dark_signal);
    nonneg("dark_idler", dark_idler);
    if (!(std::isfinite(coincidence_window_s) && coincidence_window_s > 0.0))
      bad("coincidence_window_s", "must be finite and > 0");
    if (!(std::isfinite(imbalance_alpha_rad) &&
          std::abs(imbalance_alpha_rad) <= std::numbers::pi / 4 + 1e-12))
      bad("imbalance_alpha_rad", "must lie in [-pi/4, pi/4]");
    if (!std::isfinite(phase_phi_rad)) bad("phase_phi_rad", "must be finite");
    unit("dephasing_d", dephasing_d);
    unit("white_noise_w", white_noise_w);
  }

  // The calibrated reference operating point (equal to the defaults).
  static SourceConfig calibrated_preset() { return SourceConfig{}; }
};

// The noise parameters in isolation.
struct NoiseModel {
  double alpha_rad = 0.0;
  double phi_rad = 0.0;
  double dephasing = 1.0;
  double white_noise = 0.0;
};

inline NoiseModel noise_model(const SourceConfig& cfg) {
  cfg.validate();
  return {cfg.imbalance_alpha_rad, cfg.phase_phi_rad, cfg.dephasing_d, cfg.white_noise_w};
}

// The loss-free, noise-free emission: |phi+>.
inline PolState ideal_state() { return polcalc::bell(polcalc::Bell::PhiPlus); }

// The emitted two-photon density matrix under the configured noise knobs.
inline PolState noisy_state(const SourceConfig& cfg) {
  cfg.validate();
  const double c = std::cos(std::numbers::pi / 4 + cfg.imbalance_alpha_rad);
  const double s = std::sin(std::numbers::pi / 4 + cfg.imbalance_alpha_rad);
  Vec psi = Vec::Zero(4);
  psi(0) = c;                                    // |HH>
  psi(3) = std::polar(s, cfg.phase_phi_rad);     // e^{i phi} |VV>
  Mat rho = psi * psi.adjoint();
  rho(0, 3) *= cfg.dephasing_d;                  // scale HH-VV coherences
  rho(3, 0) *= cfg.dephasing_d;
  const double w = cfg.white_noise_w;
  Mat out = (1.0 - w) * rho + w * Mat::Identity(4, 4) / 4.0;
  return PolState::mixed(std::move(out));
}

// Fidelity of the emitted state to the maximally entangled target |phi+>.
inline double fidelity_to_target(const SourceConfig& cfg) {
  return polcalc::fidelity(noisy_state(cfg), ideal_state());
}

// Pairs generated per second at the crystal for the configured pump power.
inline double pair_generation_rate(const SourceConfig& cfg) {
  cfg.validate();
  return cfg.pgr_per_mw * cfg.pump_power_mw;
}

// Accidental coincidence rate A = N_s N_i tau for uncorrelated singles
// streams within a coincidence window tau.
inline double accidental_rate(double n_signal, double n_idler, double window_s) {
  if (!(std::isfinite(n_signal) && n_signal >= 0.0) ||
      !(std::isfinite(n_idler) && n_idler >= 0.0))
    throw std::invalid_argument("accidental_rate: singles rates must be finite and >= 0");
  if (!(std::isfinite(window_s) && window_s >= 0.0))
    throw std::invalid_argument("accidental_rate: window must be finite and >= 0");
  return n_signal * n_idler * window_s;
}

// The white-noise weight equivalent to an accidental rate A on top of a true
// coincidence rate C: w = A / (C + A).  Accidentals carry no polarization
// correlation, so they enter the state as the I/4 admixture.
inline double accidental_white_noise(double n_signal, double n_idler, double window_s,
                                     double true_coincidence) {
  if (!(std::isfinite(true_coincidence) && true_coincidence >= 0.0))
    throw std::invalid_argument("accidental_white_noise: coincidence rate must be >= 0");
  const double a = accidental_rate(n_signal, n_idler, window_s);
  if (a == 0.0) return 0.0;
  return a / (true_coincidence + a);
}

// Same estimate evaluated at the configuration's own expected rates.
inline double accidental_white_noise(const SourceConfig& cfg) {
  cfg.validate();
  const double mu = cfg.pgr_per_mw * cfg.pump_power_mw;
  const double n_s = mu * cfg.eta_signal + cfg.dark_signal;
  const double n_i = mu * cfg.eta_idler + cfg.dark_idler;
  const double c_true = mu * cfg.eta_signal * cfg.eta_idler;
  return accidental_white_noise(n_s, n_i, cfg.coincidence_window_s, c_true);
}

// Solve for the white-noise weight w that brings the emitted state's
// fidelity to `target_fidelity`, holding every other knob of `base` fixed.
// The fidelity is strictly decreasing in w, so a bisection on the actual
// model suffices; no closed form is assumed.
inline double calibrate_white_noise(double target_fidelity, SourceConfig base = SourceConfig{}) {
  if (!(std::isfinite(target_fidelity) && target_fidelity >= 0.0 && target_fidelity <= 1.0))
    throw ConfigError("calibrate_white_noise: target fidelity must lie in [0, 1]");
  const auto fid_at = [&](double w) {
    SourceConfig cfg = base;
    cfg.white_noise_w = w;
    return fidelity_to_target(cfg);
  };
  double lo = 0.0, hi = 1.0;
  double f_lo = fid_at(lo), f_hi = fid_at(hi);
  if (target_fidelity > f_lo + 1e-12 || target_fidelity < f_hi - 1e-12)
    throw ConfigError("calibrate_white_noise: target fidelity " +
                      std::to_string(target_fidelity) + " is outside the reachable range [" +
                      std::to_string(f_hi) + ", " + std::to_string(f_lo) + "]");
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (fid_at(mid) >= target_fidelity)
      lo = mid;  // still above target; more noise needed
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace epl::source
