#pragma once

// Polarization-to-path teleportation pipeline.  The idler photon's
// polarization qubit is relabeled as a path qubit (beam-displacer mapping),
// freeing its polarization to carry a freshly prepared input state.  A Bell
// state measurement on the idler's (path, polarization) pair then teleports
// the input onto the signal photon's polarization, up to an
// outcome-dependent Pauli correction.
//
// The BSM has finite interference visibility v: each outcome POVM element is
// v Pi_bell + (1 - v)/2 (Pi_1 + Pi_2), where Pi_1, Pi_2 project onto the two
// computational basis states the Bell state is built from.  v = 1 is a
// perfect BSM; v = 0 retains only which-basis information.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "epl/errors.hpp"
#include "epl/polcalc.hpp"
#include "epl/source.hpp"

namespace epl::teleport {

using polcalc::Bell;
using polcalc::PolState;
using polcalc::Unitary2;

// Which Bell label the analyzer hardware assigns to each physical outcome
// port.  `standard` names the ports by the textbook projector they detect;
// `paper` is the reversed labeling (phi+ <-> psi-, phi- <-> psi+) used by
// setups that quote corrections {phi+: XZ, phi-: X, psi+: Z, psi-: I}.
enum class Convention { standard, paper };

inline std::string convention_name(Convention c) {
  return c == Convention::standard ? "standard" : "paper";
}

inline Convention parse_convention(std::string_view name) {
  if (name == "standard") return Convention::standard;
  if (name == "paper") return Convention::paper;
  throw ConfigError("parse_convention: unknown convention '" + std::string(name) +
                    "' (expected standard or paper)");
}

// Pauli correction per Bell label, indexed by polcalc::kBellOrder.
using CorrectionTable = std::array<Unitary2, 4>;

namespace detail {

inline Unitary2 pauli_word(std::string_view word) {
  if (word == "I") return polcalc::identity2();
  if (word == "X") return polcalc::pauli_x();
  if (word == "Z") return polcalc::pauli_z();
  if (word == "XZ") return Unitary2(Mat2(polcalc::pauli_x().m * polcalc::pauli_z().m));
  throw ConfigError("pauli_word: unknown correction '" + std::string(word) +
                    "' (expected I, X, Z, or XZ)");
}

inline std::size_t bell_index(Bell b) {
  for (std::size_t i = 0; i < polcalc::kBellOrder.size(); ++i)
    if (polcalc::kBellOrder[i] == b) return i;
  throw std::logic_error("bell_index: bad enum");
}

}  // namespace detail

inline CorrectionTable correction_table(Convention convention) {
  using detail::pauli_word;
  if (convention == Convention::standard)
    return {pauli_word("I"), pauli_word("Z"), pauli_word("X"), pauli_word("XZ")};
  return {pauli_word("XZ"), pauli_word("X"), pauli_word("Z"), pauli_word("I")};
}

inline Unitary2 correction_for(Bell outcome, Convention convention) {
  return correction_table(convention)[detail::bell_index(outcome)];
}

// Relabel the idler polarization mode as an idler path mode (|H> -> path 0,
// |V> -> path 1).  The amplitudes are untouched; only the physical meaning
// of mode 1 changes, which is what lets a new polarization input ride along
// on the idler photon.
inline PolState bd_map(const PolState& signal_idler) {
  if (signal_idler.modes() != 2)
    throw std::invalid_argument("bd_map: expected a 2-mode (signal, idler) state");
  return signal_idler;
}

enum class InputLabel { H, V, D, R };

inline std::string input_name(InputLabel l) {
  switch (l) {
    case InputLabel::H: return "H";
    case InputLabel::V: return "V";
    case InputLabel::D: return "D";
    case InputLabel::R: return "R";
  }
  throw std::logic_error("input_name: bad enum");
}

inline InputLabel parse_input(std::string_view name) {
  if (name == "H" || name == "h") return InputLabel::H;
  if (name == "V" || name == "v") return InputLabel::V;
  if (name == "D" || name == "d") return InputLabel::D;
  if (name == "R" || name == "r") return InputLabel::R;
  throw ConfigError("parse_input: unknown input state '" + std::string(name) +
                    "' (expected H, V, D, or R)");
}

inline PolState prepare_input(InputLabel label) {
  switch (label) {
    case InputLabel::H: return polcalc::ket_h();
    case InputLabel::V: return polcalc::ket_v();
    case InputLabel::D: return polcalc::ket_d();
    case InputLabel::R: return polcalc::ket_r();
  }
  throw std::logic_error("prepare_input: bad enum");
}

// Input prepared by physical plates: |in> = HWP(h) QWP(q) |H>.
inline PolState prepare_input(double hwp_deg, double qwp_deg) {
  return polcalc::apply(polcalc::hwp(hwp_deg), polcalc::apply(polcalc::qwp(qwp_deg), polcalc::ket_h()));
}

// One BSM outcome: its label under the configured convention, the outcome
// probability, and the signal photon's conditional (uncorrected) state.
struct BsmOutcome {
  Bell label;
  double probability = 0.0;
  PolState signal_state;
};

namespace detail {

// POVM element of one physical Bell port at visibility v, on the 4-dim
// (path, polarization) space.
inline Mat bsm_element(Bell physical, double v) {
  const Mat pi_bell = polcalc::projector(polcalc::bell(physical));
  Mat basis_part = Mat::Zero(4, 4);
  // phi states live on |00>, |11>; psi states on |01>, |10>.
  if (physical == Bell::PhiPlus || physical == Bell::PhiMinus) {
    basis_part(0, 0) = 1.0;
    basis_part(3, 3) = 1.0;
  } else {
    basis_part(1, 1) = 1.0;
    basis_part(2, 2) = 1.0;
  }
  return v * pi_bell + (1.0 - v) / 2.0 * basis_part;
}

// Label permutation: which physical port the convention calls `label`.
inline Bell physical_port(Bell label, Convention convention) {
  if (convention == Convention::standard) return label;
  return polcalc::kBellOrder[3 - bell_index(label)];  // reversed labeling
}

}  // namespace detail

// Bell state measurement on the last two modes (path, polarization) of the
// 3-mode joint state, keeping the first (signal polarization) mode.  The
// four outcomes are returned in Bell label order; probabilities sum to 1.
inline std::vector<BsmOutcome> bsm(const PolState& joint, double visibility,
                                   Convention convention = Convention::standard) {
  if (joint.modes() != 3)
    throw std::invalid_argument("bsm: expected a 3-mode (signal, path, polarization) state");
  if (!(std::isfinite(visibility) && visibility >= 0.0 && visibility <= 1.0))
    throw std::invalid_argument("bsm: visibility must lie in [0, 1]");

  const Mat rho = joint.density_matrix();  // 8x8, index = 4*signal + measured
  std::vector<BsmOutcome> outcomes;
  outcomes.reserve(4);
  double prob_sum = 0.0;
  for (Bell label : polcalc::kBellOrder) {
    const Mat e = detail::bsm_element(detail::physical_port(label, convention), visibility);
    // sigma_{s s'} = sum_{m m'} E_{m m'} rho_{(s, m'), (s', m)}  (= Tr_meas[(I x E) rho])
    Mat sigma = Mat::Zero(2, 2);
    for (int s = 0; s < 2; ++s)
      for (int sp = 0; sp < 2; ++sp)
        for (int m = 0; m < 4; ++m)
          for (int mp = 0; mp < 4; ++mp) sigma(s, sp) += e(m, mp) * rho(4 * s + mp, 4 * sp + m);
    const double p = sigma.trace().real();
    prob_sum += p;
    PolState conditional = p > 1e-15
                               ? PolState::mixed(Mat(sigma / p))
                               : PolState::mixed(Mat(Mat::Identity(2, 2) / 2.0));
    outcomes.push_back({label, p, std::move(conditional)});
  }
  if (std::abs(prob_sum - 1.0) > 1e-10)
    throw std::logic_error("bsm: outcome probabilities sum to " + std::to_string(prob_sum));
  return outcomes;
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

struct TeleportConfig {
  source::SourceConfig source{};
  std::vector<std::pair<std::string, PolState>> inputs = default_inputs();
  double bsm_visibility = 1.0;
  Convention convention = Convention::paper;
  // Optional replacement for the convention's correction table; a mismatched
  // pairing fails the noiseless self-check and is reported as ConfigError.
  std::optional<CorrectionTable> correction_override{};

  static std::vector<std::pair<std::string, PolState>> default_inputs() {
    std::vector<std::pair<std::string, PolState>> v;
    for (InputLabel l : {InputLabel::H, InputLabel::V, InputLabel::D, InputLabel::R})
      v.emplace_back(input_name(l), prepare_input(l));
    return v;
  }
};

struct TeleportCell {
  Bell outcome;
  double probability = 0.0;
  double fidelity = 0.0;  // corrected output vs. the input state
};

struct TeleportReport {
  std::vector<std::string> inputs;
  std::vector<std::array<TeleportCell, 4>> cells;  // [input][outcome]
  std::vector<double> input_fidelity;              // feedforward average per input
  double average_fidelity = 0.0;
  double bsm_visibility = 1.0;
  Convention convention = Convention::paper;
};

namespace detail {

inline double corrected_fidelity(const Unitary2& correction, const PolState& conditional,
                                 const PolState& input) {
  return polcalc::fidelity(polcalc::apply(correction, conditional), input);
}

// The noiseless self-check: with an ideal source and a perfect BSM, every
// corrected outcome must return the input exactly.  {H, D, R} distinguish
// all Pauli-word mislabelings.
inline void verify_pairing(const CorrectionTable& table, Convention convention) {
  const PolState ideal = source::ideal_state();
  for (InputLabel l : {InputLabel::H, InputLabel::D, InputLabel::R}) {
    const PolState input = prepare_input(l);
    const PolState joint = polcalc::tensor(bd_map(ideal), input);
    for (const auto& outcome : bsm(joint, 1.0, convention)) {
      const double f =
          corrected_fidelity(table[bell_index(outcome.label)], outcome.signal_state, input);
      if (f < 1.0 - 1e-9)
        throw ConfigError("teleport: correction table is inconsistent with the '" +
                          convention_name(convention) + "' BSM labeling (input " +
                          input_name(l) + ", outcome " + polcalc::bell_name(outcome.label) +
                          ", corrected fidelity " + std::to_string(f) + ")");
    }
  }
}

}  // namespace detail

// Run the full pipeline for every configured input state.
inline TeleportReport run_teleport(const TeleportConfig& cfg) {
  cfg.source.validate();
  if (!(std::isfinite(cfg.bsm_visibility) && cfg.bsm_visibility >= 0.0 && cfg.bsm_visibility <= 1.0))
    throw ConfigError("teleport.bsm_visibility: must lie in [0, 1]");
  if (cfg.inputs.empty()) throw ConfigError("teleport.inputs: at least one input state required");
  for (const auto& [name, state] : cfg.inputs)
    if (!state.is_pure() || state.modes() != 1)
      throw ConfigError("teleport.inputs: input '" + name + "' must be a pure single-mode state");

  const CorrectionTable table =
      cfg.correction_override ? *cfg.correction_override : correction_table(cfg.convention);
  detail::verify_pairing(table, cfg.convention);

  const PolState mapped = bd_map(source::noisy_state(cfg.source));

  TeleportReport report;
  report.bsm_visibility = cfg.bsm_visibility;
  report.convention = cfg.convention;
  double fidelity_sum = 0.0;
  for (const auto& [name, input] : cfg.inputs) {
    const PolState joint = polcalc::tensor(mapped, input);
    const auto outcomes = bsm(joint, cfg.bsm_visibility, cfg.convention);
    std::array<TeleportCell, 4> row{};
    double avg = 0.0;
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
      const auto& o = outcomes[k];
      const double f =
          detail::corrected_fidelity(table[detail::bell_index(o.label)], o.signal_state, input);
      row[k] = {o.label, o.probability, f};
      avg += o.probability * f;
    }
    report.inputs.push_back(name);
    report.cells.push_back(row);
    report.input_fidelity.push_back(avg);
    fidelity_sum += avg;
  }
  report.average_fidelity = fidelity_sum / static_cast<double>(cfg.inputs.size());
  return report;
}

// Solve for the BSM visibility that brings the average teleportation
// fidelity to `target`; the average is strictly increasing in v.
inline double calibrate_bsm_visibility(double target, TeleportConfig base = TeleportConfig{}) {
  if (!(std::isfinite(target) && target >= 0.0 && target <= 1.0))
    throw ConfigError("calibrate_bsm_visibility: target must lie in [0, 1]");
  const auto avg_at = [&](double v) {
    TeleportConfig cfg = base;
    cfg.bsm_visibility = v;
    return run_teleport(cfg).average_fidelity;
  };
  double lo = 0.0, hi = 1.0;
  const double f_lo = avg_at(lo), f_hi = avg_at(hi);
  if (target < f_lo - 1e-12 || target > f_hi + 1e-12)
    throw ConfigError("calibrate_bsm_visibility: target " + std::to_string(target) +
                      " is outside the reachable range [" + std::to_string(f_lo) + ", " +
                      std::to_string(f_hi) + "]");
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (avg_at(mid) <= target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace epl::teleport
