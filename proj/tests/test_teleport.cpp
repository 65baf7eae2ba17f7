// Teleportation pipeline: conventions and correction tables, the BSM POVM,
// closed-form fidelities, and a brute-force density-matrix oracle.

#include <cmath>
#include <vector>

#include "catch2/catch_amalgamated.hpp"

#include "epl/polcalc.hpp"
#include "epl/source.hpp"
#include "epl/teleport.hpp"

using namespace epl;
using namespace epl::teleport;
using polcalc::Bell;
using polcalc::PolState;
using source::SourceConfig;

namespace {

// Brute-force oracle: the same physics computed directly on the 8x8 joint
// density matrix via a Kraus square root of each POVM element, with the
// measured pair traced out index-by-index.  No bsm() internals are reused.
struct OracleCell {
  double probability;
  double fidelity;
};

OracleCell oracle_cell(const Mat& joint_rho, Bell label, double v, Convention conv,
                       const polcalc::Unitary2& correction, const PolState& input) {
  // POVM element on the measured (path, polarization) pair.
  const Bell physical = conv == Convention::standard
                            ? label
                            : polcalc::kBellOrder[3 - teleport::detail::bell_index(label)];
  Mat e = v * polcalc::projector(polcalc::bell(physical));
  if (physical == Bell::PhiPlus || physical == Bell::PhiMinus) {
    e(0, 0) += (1.0 - v) / 2.0;
    e(3, 3) += (1.0 - v) / 2.0;
  } else {
    e(1, 1) += (1.0 - v) / 2.0;
    e(2, 2) += (1.0 - v) / 2.0;
  }
  // Kraus square root, lifted to the full space with identity on the signal.
  Eigen::SelfAdjointEigenSolver<Mat> es(e);
  const Eigen::VectorXcd sqrt_eigs = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().cast<cd>();
  const Mat sqrt_e = es.eigenvectors() * sqrt_eigs.asDiagonal() * es.eigenvectors().adjoint();
  const Mat k = polcalc::kron(Mat::Identity(2, 2), sqrt_e);
  const Mat post = k * joint_rho * k.adjoint();
  // Trace out the measured pair (flat index = 4*signal + measured).
  Mat sigma = Mat::Zero(2, 2);
  for (int s = 0; s < 2; ++s)
    for (int sp = 0; sp < 2; ++sp)
      for (int m = 0; m < 4; ++m) sigma(s, sp) += post(4 * s + m, 4 * sp + m);
  const double p = sigma.trace().real();
  const Mat corrected = correction.m * (sigma / p) * correction.m.adjoint();
  const Mat target = input.density_matrix();
  return {p, (corrected * target).trace().real()};
}

}  // namespace

TEST_CASE("ideal pipeline teleports perfectly in both conventions", "[teleport]") {
  for (Convention conv : {Convention::standard, Convention::paper}) {
    TeleportConfig cfg;
    cfg.source.white_noise_w = 0.0;
    cfg.bsm_visibility = 1.0;
    cfg.convention = conv;
    const TeleportReport report = run_teleport(cfg);
    REQUIRE(report.inputs.size() == 4);
    for (std::size_t i = 0; i < report.cells.size(); ++i) {
      double psum = 0.0;
      for (const auto& cell : report.cells[i]) {
        CHECK(cell.fidelity == Catch::Approx(1.0).margin(1e-10));
        CHECK(cell.probability == Catch::Approx(0.25).margin(1e-10));
        psum += cell.probability;
      }
      CHECK(psum == Catch::Approx(1.0).margin(1e-10));
      CHECK(report.input_fidelity[i] == Catch::Approx(1.0).margin(1e-10));
    }
    CHECK(report.average_fidelity == Catch::Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("correction tables pair with their conventions only", "[teleport]") {
  // Swapping the tables between conventions must fail the noiseless
  // self-check with a ConfigError.
  TeleportConfig cfg;
  cfg.convention = Convention::paper;
  cfg.correction_override = correction_table(Convention::standard);
  CHECK_THROWS_AS(run_teleport(cfg), ConfigError);

  cfg.convention = Convention::standard;
  cfg.correction_override = correction_table(Convention::paper);
  CHECK_THROWS_AS(run_teleport(cfg), ConfigError);

  // The matched overrides run clean.
  cfg.correction_override = correction_table(Convention::standard);
  CHECK_NOTHROW(run_teleport(cfg));

  CHECK_THROWS_AS(parse_convention("textbook"), ConfigError);
  CHECK(parse_convention("paper") == Convention::paper);
  CHECK(convention_name(Convention::standard) == "standard");
  CHECK_THROWS_AS(teleport::detail::pauli_word("Y"), ConfigError);
}

TEST_CASE("closed-form fidelities at the calibrated operating point", "[teleport]") {
  // With the Werner-form source (weight p = 1 - w) and a perfect BSM, every
  // input teleports with fidelity (1 + p)/2.
  TeleportConfig cfg;  // preset source, w = 0.02
  cfg.bsm_visibility = 1.0;
  const TeleportReport perfect = run_teleport(cfg);
  CHECK(perfect.average_fidelity == Catch::Approx(0.99).margin(1e-12));
  for (const auto& row : perfect.cells)
    for (const auto& cell : row) CHECK(cell.fidelity == Catch::Approx(0.99).margin(1e-12));

  // At v = 6/7 the {H, V, D, R} average lands exactly on 0.955: H and V are
  // visibility-independent (0.99) while D and R drop to 0.92.
  cfg.bsm_visibility = 6.0 / 7.0;
  const TeleportReport cal = run_teleport(cfg);
  CHECK(cal.average_fidelity == Catch::Approx(0.955).margin(1e-9));
  CHECK(cal.input_fidelity[0] == Catch::Approx(0.99).margin(1e-9));   // H
  CHECK(cal.input_fidelity[1] == Catch::Approx(0.99).margin(1e-9));   // V
  CHECK(cal.input_fidelity[2] == Catch::Approx(0.92).margin(1e-9));   // D
  CHECK(cal.input_fidelity[3] == Catch::Approx(0.92).margin(1e-9));   // R

  // Outcome probabilities stay uniform for these inputs.
  for (const auto& row : cal.cells)
    for (const auto& cell : row) CHECK(cell.probability == Catch::Approx(0.25).margin(1e-9));
}

TEST_CASE("a visibility-zero BSM leaves two thirds average fidelity", "[teleport]") {
  // The 2/3 classical-boundary average holds for the uniform six-state
  // (Pauli eigenstate) ensemble with an ideal source.
  TeleportConfig six;
  six.source.white_noise_w = 0.0;
  six.bsm_visibility = 0.0;
  six.inputs = {{"H", polcalc::ket_h()}, {"V", polcalc::ket_v()}, {"D", polcalc::ket_d()},
                {"A", polcalc::ket_a()}, {"R", polcalc::ket_r()}, {"L", polcalc::ket_l()}};
  const TeleportReport report = run_teleport(six);
  CHECK(report.average_fidelity == Catch::Approx(2.0 / 3.0).margin(1e-12));

  // The four-state {H, V, D, R} ensemble sits higher (3/4): H and V survive
  // a which-basis-only measurement, D and R decohere to 1/2.
  TeleportConfig four;
  four.source.white_noise_w = 0.0;
  four.bsm_visibility = 0.0;
  const TeleportReport r4 = run_teleport(four);
  CHECK(r4.average_fidelity == Catch::Approx(0.75).margin(1e-12));
  CHECK(r4.input_fidelity[0] == Catch::Approx(1.0).margin(1e-12));  // H
  CHECK(r4.input_fidelity[2] == Catch::Approx(0.5).margin(1e-12));  // D
}

TEST_CASE("average fidelity is monotone in visibility and source quality", "[teleport]") {
  double prev = 0.0;
  for (double v : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    TeleportConfig cfg;
    cfg.bsm_visibility = v;
    const double avg = run_teleport(cfg).average_fidelity;
    CHECK(avg > prev);
    prev = avg;
  }
  prev = 1.0;
  for (double w : {0.0, 0.02, 0.1, 0.5}) {
    TeleportConfig cfg;
    cfg.source.white_noise_w = w;
    cfg.bsm_visibility = 0.9;
    const double avg = run_teleport(cfg).average_fidelity;
    CHECK(avg < prev);
    prev = avg;
  }
}

TEST_CASE("pipeline agrees with the brute-force oracle cell by cell", "[teleport]") {
  SourceConfig noisy = SourceConfig::calibrated_preset();
  noisy.imbalance_alpha_rad = 0.05;
  noisy.phase_phi_rad = 0.3;
  noisy.dephasing_d = 0.9;

  for (const SourceConfig& src : {SourceConfig::calibrated_preset(), noisy}) {
    for (double v : {1.0, 6.0 / 7.0, 0.3}) {
      for (Convention conv : {Convention::standard, Convention::paper}) {
        TeleportConfig cfg;
        cfg.source = src;
        cfg.bsm_visibility = v;
        cfg.convention = conv;
        const TeleportReport report = run_teleport(cfg);
        const CorrectionTable table = correction_table(conv);

        for (std::size_t i = 0; i < cfg.inputs.size(); ++i) {
          const Mat joint = polcalc::kron(source::noisy_state(src).density(),
                                          cfg.inputs[i].second.density_matrix());
          for (std::size_t k = 0; k < 4; ++k) {
            const auto& cell = report.cells[i][k];
            const OracleCell oracle = oracle_cell(joint, cell.outcome, v, conv,
                                                  table[k], cfg.inputs[i].second);
            CHECK(std::abs(cell.probability - oracle.probability) <= 1e-10);
            CHECK(std::abs(cell.fidelity - oracle.fidelity) <= 1e-10);
          }
        }
      }
    }
  }
}

TEST_CASE("visibility calibration inverts the fidelity curve", "[teleport]") {
  // At the calibrated source, v = 6/7 produces 0.955 exactly.
  const double v = calibrate_bsm_visibility(0.955);
  CHECK(v == Catch::Approx(6.0 / 7.0).margin(1e-9));

  TeleportConfig cfg;
  cfg.bsm_visibility = calibrate_bsm_visibility(0.97);
  CHECK(run_teleport(cfg).average_fidelity == Catch::Approx(0.97).margin(1e-9));

  // Targets above the v = 1 ceiling (0.99 at the preset) are unreachable.
  CHECK_THROWS_AS(calibrate_bsm_visibility(0.995), ConfigError);
}

TEST_CASE("bsm validates its inputs and normalizes outcomes", "[teleport]") {
  const PolState joint = polcalc::tensor(bd_map(source::ideal_state()), polcalc::ket_d());
  const auto outcomes = bsm(joint, 0.7);
  REQUIRE(outcomes.size() == 4);
  double sum = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(outcomes[k].label == polcalc::kBellOrder[k]);
    CHECK(outcomes[k].probability >= 0.0);
    sum += outcomes[k].probability;
    CHECK(std::abs(outcomes[k].signal_state.density().trace().real() - 1.0) <= 1e-12);
  }
  CHECK(sum == Catch::Approx(1.0).margin(1e-10));

  CHECK_THROWS_AS(bsm(source::ideal_state(), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(bsm(joint, 1.2), std::invalid_argument);
  CHECK_THROWS_AS(bd_map(polcalc::ket_h()), std::invalid_argument);
}

TEST_CASE("input preparation by label and by wave plates", "[teleport]") {
  CHECK(parse_input("h") == InputLabel::H);
  CHECK(parse_input("R") == InputLabel::R);
  CHECK_THROWS_AS(parse_input("L"), ConfigError);
  for (InputLabel l : {InputLabel::H, InputLabel::V, InputLabel::D, InputLabel::R})
    CHECK(parse_input(input_name(l)) == l);

  CHECK(std::abs(polcalc::overlap(prepare_input(0.0, 0.0), polcalc::ket_h())) ==
        Catch::Approx(1.0).margin(1e-12));
  CHECK(std::abs(polcalc::overlap(prepare_input(45.0, 0.0), polcalc::ket_v())) ==
        Catch::Approx(1.0).margin(1e-12));
  CHECK(std::abs(polcalc::overlap(prepare_input(22.5, 0.0), polcalc::ket_d())) ==
        Catch::Approx(1.0).margin(1e-12));

  // Invalid input states are configuration errors.
  TeleportConfig cfg;
  cfg.inputs = {{"mixed", polcalc::PolState::mixed(Mat(Mat::Identity(2, 2) / 2.0))}};
  CHECK_THROWS_AS(run_teleport(cfg), ConfigError);
  cfg.inputs = {{"pair", polcalc::bell(Bell::PhiPlus)}};
  CHECK_THROWS_AS(run_teleport(cfg), ConfigError);
  cfg.inputs.clear();
  CHECK_THROWS_AS(run_teleport(cfg), ConfigError);
}
