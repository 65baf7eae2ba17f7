// Source model: emitted-state closed forms, validation, accidental-noise
// estimates, and white-noise calibration.

#include <cmath>
#include <numbers>

#include "catch2/catch_amalgamated.hpp"

#include "epl/source.hpp"

using namespace epl;
using namespace epl::source;

namespace {

// Closed-form fidelity of the noise model to |phi+>:
// F = (1 - w) (1 + d cos 2a cos phi) / 2 + w / 4.
double fidelity_formula(double alpha, double phi, double d, double w) {
  return (1.0 - w) * (1.0 + d * std::cos(2.0 * alpha) * std::cos(phi)) / 2.0 + w / 4.0;
}

SourceConfig with_noise(double alpha, double phi, double d, double w) {
  SourceConfig cfg;
  cfg.imbalance_alpha_rad = alpha;
  cfg.phase_phi_rad = phi;
  cfg.dephasing_d = d;
  cfg.white_noise_w = w;
  return cfg;
}

}  // namespace

TEST_CASE("calibrated preset hits the reference operating point", "[source]") {
  const SourceConfig cfg = SourceConfig::calibrated_preset();
  cfg.validate();
  CHECK(pair_generation_rate(cfg) == Catch::Approx(8.2e5).margin(1e-6));
  CHECK(fidelity_to_target(cfg) == Catch::Approx(0.985).margin(1e-12));

  // Doubling the pump power doubles the generation rate.
  SourceConfig twice = cfg;
  twice.pump_power_mw = 2.0;
  CHECK(pair_generation_rate(twice) == Catch::Approx(1.64e6).margin(1e-6));
}

TEST_CASE("emitted state matches the closed-form fidelity on a noise grid", "[source]") {
  const double pi = std::numbers::pi;
  for (double alpha : {-pi / 4, -0.3, 0.0, 0.1, pi / 4}) {
    for (double phi : {0.0, 0.4, pi / 2, pi, 5.0}) {
      for (double d : {0.0, 0.3, 0.9, 1.0}) {
        for (double w : {0.0, 0.02, 0.3, 1.0}) {
          const SourceConfig cfg = with_noise(alpha, phi, d, w);
          CHECK(std::abs(fidelity_to_target(cfg) - fidelity_formula(alpha, phi, d, w)) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("noise knobs degrade fidelity monotonically", "[source]") {
  double prev = 1.0;
  for (double w : {0.0, 0.1, 0.2, 0.5, 1.0}) {
    const double f = fidelity_to_target(with_noise(0, 0, 1, w));
    CHECK(f < prev + 1e-15);
    prev = f;
  }
  prev = 1.0;
  for (double alpha : {0.0, 0.1, 0.3, std::numbers::pi / 4}) {
    const double f = fidelity_to_target(with_noise(alpha, 0, 1, 0));
    CHECK(f < prev + 1e-15);
    prev = f;
  }
  prev = 1.0;
  for (double d : {1.0, 0.8, 0.4, 0.0}) {
    const double f = fidelity_to_target(with_noise(0, 0, d, 0));
    CHECK(f < prev + 1e-15);
    prev = f;
  }
  prev = 1.0;
  for (double phi : {0.0, 0.5, 1.5, std::numbers::pi}) {
    const double f = fidelity_to_target(with_noise(0, phi, 1, 0));
    CHECK(f < prev + 1e-15);
    prev = f;
  }
}

TEST_CASE("balanced dephasing-free source is a Werner state", "[source]") {
  for (double w : {0.0, 0.02, 0.3, 0.9}) {
    const Mat got = noisy_state(with_noise(0, 0, 1, w)).density();
    const Mat expect = polcalc::werner(1.0 - w).density();
    CHECK((got - expect).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("ideal state is phi+ and the w=1 state is maximally mixed", "[source]") {
  CHECK(polcalc::fidelity(ideal_state(), polcalc::bell(polcalc::Bell::PhiPlus)) ==
        Catch::Approx(1.0).margin(1e-15));
  const Mat rho = noisy_state(with_noise(0.2, 1.0, 0.5, 1.0)).density();
  CHECK((rho - Mat::Identity(4, 4) / 4.0).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("configuration validation names the offending field", "[source]") {
  const auto expect_error = [](SourceConfig cfg, const std::string& needle) {
    try {
      cfg.validate();
      FAIL("expected ConfigError mentioning " + needle);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  SourceConfig cfg;
  cfg.pump_power_mw = -1.0;
  expect_error(cfg, "pump_power_mw");

  cfg = SourceConfig{};
  cfg.coincidence_per_mw = 9e5;  // exceeds pgr_per_mw
  expect_error(cfg, "coincidence_per_mw");

  cfg = SourceConfig{};
  cfg.eta_signal = 1.0001;
  expect_error(cfg, "eta_signal");

  cfg = SourceConfig{};
  cfg.coincidence_window_s = 0.0;
  expect_error(cfg, "coincidence_window_s");

  cfg = SourceConfig{};
  cfg.imbalance_alpha_rad = 1.0;  // > pi/4
  expect_error(cfg, "imbalance_alpha_rad");

  cfg = SourceConfig{};
  cfg.dephasing_d = -0.1;
  expect_error(cfg, "dephasing_d");

  cfg = SourceConfig{};
  cfg.white_noise_w = 1.5;
  expect_error(cfg, "white_noise_w");
}

TEST_CASE("accidental rate and its white-noise equivalent", "[source]") {
  CHECK(accidental_rate(1000.0, 2000.0, 1e-9) == Catch::Approx(2e-3).margin(1e-15));
  CHECK(accidental_rate(0.0, 2000.0, 1e-9) == 0.0);
  CHECK_THROWS_AS(accidental_rate(-1.0, 1.0, 1e-9), std::invalid_argument);

  // At the calibrated preset: N = 8.2e5 * 0.191 per arm, A = N^2 tau,
  // C_true = 8.2e5 * 0.191^2, w = A / (C + A).
  const double n = 8.2e5 * 0.191;
  const double a = n * n * 1e-9;
  const double c = 8.2e5 * 0.191 * 0.191;
  const double expected = a / (c + a);
  CHECK(accidental_white_noise(SourceConfig::calibrated_preset()) ==
        Catch::Approx(expected).margin(1e-15));
  // Numerically ~8.19e-4: a small fraction of the overall 0.02 white noise.
  CHECK(expected == Catch::Approx(8.193e-4).margin(2e-6));
  CHECK(expected < 0.02);

  CHECK(accidental_white_noise(0.0, 0.0, 1e-9, 100.0) == 0.0);
  CHECK_THROWS_AS(accidental_white_noise(1.0, 1.0, 1e-9, -1.0), std::invalid_argument);
}

TEST_CASE("white-noise calibration inverts the fidelity map", "[source]") {
  // The preset fidelity of 0.985 corresponds to w = 0.02.
  CHECK(calibrate_white_noise(0.985) == Catch::Approx(0.02).margin(1e-9));
  CHECK(calibrate_white_noise(1.0) == Catch::Approx(0.0).margin(1e-9));

  // Round trip at an arbitrary target.
  SourceConfig cfg;
  cfg.white_noise_w = calibrate_white_noise(0.97);
  CHECK(fidelity_to_target(cfg) == Catch::Approx(0.97).margin(1e-9));

  // Works on top of other noise: alpha shifts the reachable range.
  SourceConfig base;
  base.imbalance_alpha_rad = 0.1;
  base.white_noise_w = 0.0;
  const double ceiling = fidelity_to_target(base);
  SourceConfig tuned = base;
  tuned.white_noise_w = calibrate_white_noise(0.95, base);
  CHECK(fidelity_to_target(tuned) == Catch::Approx(0.95).margin(1e-9));
  CHECK_THROWS_AS(calibrate_white_noise(ceiling + 0.01, base), ConfigError);

  // Unreachable targets are rejected.
  CHECK_THROWS_AS(calibrate_white_noise(0.1), ConfigError);
  CHECK_THROWS_AS(calibrate_white_noise(1.5), ConfigError);
}
