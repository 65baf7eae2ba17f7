#pragma once

// Counting model and estimators: expected singles/coincidence rates under
// loss, dark counts, and accidentals; heralding and pair-generation-rate
// estimators; polarization-fringe probabilities; Poisson count sampling; and
// the linear/sinusoid fits used by the sweep experiments.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "epl/format.hpp"
#include "epl/parallel.hpp"
#include "epl/polcalc.hpp"
#include "epl/rng.hpp"
#include "epl/source.hpp"

namespace epl::counts {

using polcalc::AnalyzerSetting;
using polcalc::PolState;
using source::SourceConfig;

// Whether expected rates include window accidentals.  `off` models an ideal
// coincidence discriminator; it exists so the exact estimator identities can
// be stated without accidental bias.
enum class Accidentals { window, off };

// Singles and coincidence rates, counts per second.
struct RateTriple {
  double n_signal = 0.0;
  double n_idler = 0.0;
  double coincidence = 0.0;
};

// Computational-basis resolution of a RateTriple: per-outcome singles and
// per-outcome-pair coincidences (counts per second).  Dark counts carry no
// polarization and are split evenly between H and V.
struct BasisRates {
  double h_s = 0.0, v_s = 0.0;  // signal singles behind an H / V analyzer
  double h_i = 0.0, v_i = 0.0;  // idler singles
  double hh = 0.0, hv = 0.0, vh = 0.0, vv = 0.0;  // coincidences (signal, idler)

  RateTriple total() const { return {h_s + v_s, h_i + v_i, hh + hv + vh + vv}; }
};

namespace detail {

inline Mat proj_h() { return polcalc::projector(polcalc::ket_h()); }
inline Mat proj_v() { return polcalc::projector(polcalc::ket_v()); }

}  // namespace detail

// Expected computational-basis rates for the configured source.  Singles:
// N = mu P eta p + dark.  Coincidences: C_ab = mu P eta_s eta_i p_ab plus,
// in `window` mode, the accidental contribution N_a^s N_b^i tau.
inline BasisRates expected_basis_rates(const SourceConfig& cfg,
                                       Accidentals acc = Accidentals::window) {
  cfg.validate();
  const PolState rho = source::noisy_state(cfg);
  const double mu = cfg.pgr_per_mw * cfg.pump_power_mw;
  const Mat ph = detail::proj_h();
  const Mat pv = detail::proj_v();
  const Mat id = Mat::Identity(2, 2);

  BasisRates r;
  r.h_s = mu * cfg.eta_signal * polcalc::probability(rho, polcalc::kron(ph, id)) +
          0.5 * cfg.dark_signal;
  r.v_s = mu * cfg.eta_signal * polcalc::probability(rho, polcalc::kron(pv, id)) +
          0.5 * cfg.dark_signal;
  r.h_i = mu * cfg.eta_idler * polcalc::probability(rho, polcalc::kron(id, ph)) +
          0.5 * cfg.dark_idler;
  r.v_i = mu * cfg.eta_idler * polcalc::probability(rho, polcalc::kron(id, pv)) +
          0.5 * cfg.dark_idler;

  const Mat* projs[2] = {&ph, &pv};
  const double singles_s[2] = {r.h_s, r.v_s};
  const double singles_i[2] = {r.h_i, r.v_i};
  double* cells[2][2] = {{&r.hh, &r.hv}, {&r.vh, &r.vv}};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      double c = mu * cfg.eta_signal * cfg.eta_idler *
                 polcalc::probability(rho, polcalc::kron(*projs[a], *projs[b]));
      if (acc == Accidentals::window)
        c += source::accidental_rate(singles_s[a], singles_i[b], cfg.coincidence_window_s);
      *cells[a][b] = c;
    }
  }
  return r;
}

// Total expected rates (analyzers removed): N = mu P eta + dark,
// C = mu P eta_s eta_i + accidentals.
inline RateTriple expected_rates(const SourceConfig& cfg, Accidentals acc = Accidentals::window) {
  return expected_basis_rates(cfg, acc).total();
}

// Heralding efficiency C / N of the arm opposite the `singles` stream.
inline double heralding(double coincidence, double singles) {
  if (!(std::isfinite(coincidence) && coincidence >= 0.0))
    throw std::invalid_argument("heralding: coincidence rate must be finite and >= 0");
  if (!(std::isfinite(singles) && singles > 0.0))
    throw std::invalid_argument("heralding: singles rate must be finite and > 0");
  return coincidence / singles;
}

// Pair generation rate inferred from rates alone: PGR = N_s N_i / C.
inline double pgr(double n_signal, double n_idler, double coincidence) {
  if (!(std::isfinite(n_signal) && n_signal >= 0.0) ||
      !(std::isfinite(n_idler) && n_idler >= 0.0))
    throw std::invalid_argument("pgr: singles rates must be finite and >= 0");
  if (!(std::isfinite(coincidence) && coincidence > 0.0))
    throw std::invalid_argument("pgr: coincidence rate must be finite and > 0");
  return n_signal * n_idler / coincidence;
}

inline double pgr(const RateTriple& r) { return pgr(r.n_signal, r.n_idler, r.coincidence); }

// Symmetric heralding efficiency sqrt(C / PGR); equals the geometric mean of
// the two arm efficiencies when darks and accidentals vanish.
inline double symmetric_heralding(double coincidence, double pair_rate) {
  if (!(std::isfinite(coincidence) && coincidence >= 0.0))
    throw std::invalid_argument("symmetric_heralding: coincidence rate must be >= 0");
  if (!(std::isfinite(pair_rate) && pair_rate > 0.0))
    throw std::invalid_argument("symmetric_heralding: pair rate must be > 0");
  return std::sqrt(coincidence / pair_rate);
}

// Probability that both photons pass analyzers at Bloch-plane angles
// (theta_s, theta_i): Tr[rho (P_s x P_i)].
inline double fringe_probability(const PolState& rho, double theta_s_deg, double theta_i_deg) {
  if (rho.modes() != 2)
    throw std::invalid_argument("fringe_probability: state must have exactly 2 modes");
  const Mat p = polcalc::kron(polcalc::analyzer_projector(theta_s_deg),
                              polcalc::analyzer_projector(theta_i_deg));
  return polcalc::probability(rho, p);
}

// ---------------------------------------------------------------------------
// Count settings and sampled records
// ---------------------------------------------------------------------------

// Explicit rank-1 analyzer projectors, one per arm, for settings (such as
// circular-basis tomography projections) that a Bloch-plane angle pair
// cannot express.
struct ProjectorPair {
  Mat p_s;  // 2x2
  Mat p_i;  // 2x2
};

// One detector configuration: a full computational-basis tally (monostate),
// a pair of analyzer angles, or explicit projectors.
struct CountSetting {
  std::string label;
  std::variant<std::monostate, AnalyzerSetting, ProjectorPair> kind;

  static CountSetting computational() { return {"computational", std::monostate{}}; }

  static CountSetting analyzers(double theta_s_deg, double theta_i_deg) {
    AnalyzerSetting a(theta_s_deg, theta_i_deg);
    return {"ts" + format_double(a.theta_s_deg) + "_ti" + format_double(a.theta_i_deg), a};
  }

  static CountSetting analyzers(std::string label, double theta_s_deg, double theta_i_deg) {
    return {std::move(label), AnalyzerSetting(theta_s_deg, theta_i_deg)};
  }

  static CountSetting projectors(std::string label, Mat p_s, Mat p_i) {
    if (p_s.rows() != 2 || p_s.cols() != 2 || p_i.rows() != 2 || p_i.cols() != 2)
      throw std::invalid_argument("CountSetting::projectors: projectors must be 2x2");
    return {std::move(label), ProjectorPair{std::move(p_s), std::move(p_i)}};
  }

  const AnalyzerSetting* angles() const { return std::get_if<AnalyzerSetting>(&kind); }
};

// Counts accumulated at one setting over one acquisition.
struct CountRecord {
  CountSetting setting;
  double duration_s = 0.0;
  std::uint64_t n_signal = 0;
  std::uint64_t n_idler = 0;
  std::uint64_t n_coinc = 0;
};

// Expected rates behind one count setting.  Analyzers filter the photon flux
// but not the dark counts; accidentals rebuild from the filtered singles.
inline RateTriple setting_rates(const SourceConfig& cfg, const CountSetting& setting,
                                Accidentals acc = Accidentals::window) {
  if (std::holds_alternative<std::monostate>(setting.kind)) return expected_rates(cfg, acc);

  cfg.validate();
  const PolState rho = source::noisy_state(cfg);
  Mat p_s, p_i;
  if (const auto* a = std::get_if<AnalyzerSetting>(&setting.kind)) {
    p_s = polcalc::analyzer_projector(a->theta_s_deg);
    p_i = polcalc::analyzer_projector(a->theta_i_deg);
  } else {
    const auto& pp = std::get<ProjectorPair>(setting.kind);
    p_s = pp.p_s;
    p_i = pp.p_i;
  }
  const double mu = cfg.pgr_per_mw * cfg.pump_power_mw;
  const Mat id = Mat::Identity(2, 2);
  RateTriple r;
  r.n_signal = mu * cfg.eta_signal * polcalc::probability(rho, polcalc::kron(p_s, id)) +
               cfg.dark_signal;
  r.n_idler = mu * cfg.eta_idler * polcalc::probability(rho, polcalc::kron(id, p_i)) +
              cfg.dark_idler;
  r.coincidence = mu * cfg.eta_signal * cfg.eta_idler *
                  polcalc::probability(rho, polcalc::kron(p_s, p_i));
  if (acc == Accidentals::window)
    r.coincidence += source::accidental_rate(r.n_signal, r.n_idler, cfg.coincidence_window_s);
  return r;
}

// Draw Poisson counts for every setting over `duration_s`.  Record k uses
// the derived substream (seed, stream_offset + k); identical inputs yield
// identical records on any thread count.
inline std::vector<CountRecord> simulate_counts(const SourceConfig& cfg,
                                                std::span<const CountSetting> settings,
                                                double duration_s, std::uint64_t seed,
                                                std::uint64_t stream_offset = 0,
                                                Accidentals acc = Accidentals::window) {
  cfg.validate();
  if (settings.empty()) throw std::invalid_argument("simulate_counts: no settings given");
  if (!(std::isfinite(duration_s) && duration_s >= 0.0))
    throw std::invalid_argument("simulate_counts: duration must be finite and >= 0");

  std::vector<CountRecord> records(settings.size());
  parallel_for(settings.size(), [&](std::size_t k) {
    const RateTriple rates = setting_rates(cfg, settings[k], acc);
    auto gen = rng::substream(seed, stream_offset + k);
    CountRecord rec;
    rec.setting = settings[k];
    rec.duration_s = duration_s;
    // Fixed draw order: signal, idler, coincidence.
    rec.n_signal = rng::poisson(rates.n_signal * duration_s, gen);
    rec.n_idler = rng::poisson(rates.n_idler * duration_s, gen);
    rec.n_coinc = rng::poisson(rates.coincidence * duration_s, gen);
    records[k] = std::move(rec);
  });
  return records;
}

// ---------------------------------------------------------------------------
// Fits
// ---------------------------------------------------------------------------

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 1.0;
};

// Ordinary least-squares line through (xs, ys).
inline LinearFit linear_fit(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("linear_fit: size mismatch");
  const std::size_t n = xs.size();
  if (n < 2) throw std::invalid_argument("linear_fit: need at least 2 points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]))
      throw std::invalid_argument("linear_fit: non-finite input");
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("linear_fit: need at least 2 distinct x values");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss_res += e * e;
    ss_tot += (ys[i] - my) * (ys[i] - my);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

struct SinusoidFit {
  double offset = 0.0;     // A in A + B cos(w (theta - theta0))
  double amplitude = 0.0;  // B >= 0
  double phase_deg = 0.0;  // theta0, canonical in [0, period)
  double c_max = 0.0;      // A + B
  double c_min = 0.0;      // A - B
  double visibility = 0.0; // (c_max - c_min) / (c_max + c_min)
};

// Fit counts(theta) = A + B cos(w (theta - theta0)) with w fixed by
// `period_deg`.  The linearized model (A, B cos, B sin) is solved by least
// squares; one Gauss-Newton step on (A, B, theta0) then refines the result
// and is kept only if it lowers the residual.
inline SinusoidFit sin_fit(std::span<const double> angles_deg, std::span<const double> counts,
                           double period_deg = 360.0) {
  if (angles_deg.size() != counts.size()) throw std::invalid_argument("sin_fit: size mismatch");
  if (!(std::isfinite(period_deg) && period_deg > 0.0))
    throw std::invalid_argument("sin_fit: period must be finite and > 0");
  const std::size_t n = angles_deg.size();

  std::vector<double> distinct;
  for (double a : angles_deg) {
    if (!std::isfinite(a)) throw std::invalid_argument("sin_fit: non-finite angle");
    double r = std::fmod(a, period_deg);
    if (r < 0) r += period_deg;
    bool seen = false;
    for (double d : distinct)
      if (std::abs(d - r) < 1e-12 || std::abs(std::abs(d - r) - period_deg) < 1e-12) seen = true;
    if (!seen) distinct.push_back(r);
  }
  if (distinct.size() < 4)
    throw std::invalid_argument("sin_fit: need at least 4 distinct angles per period (got " +
                                std::to_string(distinct.size()) + ")");

  const double w = 2.0 * std::numbers::pi / period_deg;  // per degree
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(counts[i])) throw std::invalid_argument("sin_fit: non-finite count");
    design(i, 0) = 1.0;
    design(i, 1) = std::cos(w * angles_deg[i]);
    design(i, 2) = std::sin(w * angles_deg[i]);
    y(i) = counts[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 3) throw std::runtime_error("sin_fit: degenerate design matrix");
  const Eigen::Vector3d beta = qr.solve(y);

  double a0 = beta(0);
  double b0 = std::hypot(beta(1), beta(2));
  double t0 = b0 > 0.0 ? std::atan2(beta(2), beta(1)) / w : 0.0;  // degrees

  const auto sse_of = [&](double a, double b, double t) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = counts[i] - a - b * std::cos(w * (angles_deg[i] - t));
      s += e * e;
    }
    return s;
  };

  // One Gauss-Newton refinement on (A, B, theta0).
  double sse = sse_of(a0, b0, t0);
  if (b0 > 0.0) {
    Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
    Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const double arg = w * (angles_deg[i] - t0);
      const double r = counts[i] - a0 - b0 * std::cos(arg);
      Eigen::Vector3d j(1.0, std::cos(arg), -b0 * w * std::sin(arg));
      jtj += j * j.transpose();
      jtr += j * r;
    }
    Eigen::FullPivLU<Eigen::Matrix3d> lu(jtj);
    if (lu.isInvertible()) {
      const Eigen::Vector3d step = lu.solve(jtr);
      const double a1 = a0 + step(0), b1 = b0 + step(1), t1 = t0 + step(2);
      if (sse_of(a1, b1, t1) < sse) {
        a0 = a1;
        b0 = b1;
        t0 = t1;
        sse = sse_of(a0, b0, t0);
      }
    }
  }

  SinusoidFit fit;
  fit.offset = a0;
  fit.amplitude = std::abs(b0);
  if (b0 < 0.0) t0 += period_deg / 2.0;  // fold a negative amplitude into the phase
  double phase = std::fmod(t0, period_deg);
  if (phase < 0) phase += period_deg;
  fit.phase_deg = phase;
  fit.c_max = fit.offset + fit.amplitude;
  fit.c_min = fit.offset - fit.amplitude;
  const double denom = fit.c_max + fit.c_min;
  fit.visibility = denom != 0.0 ? (fit.c_max - fit.c_min) / denom : 0.0;
  return fit;
}

}  // namespace epl::counts
