#pragma once

// State analysis: two-qubit tomography (projective setting tables, linear
// inversion, maximum-likelihood reconstruction), CHSH correlation statistics,
// and Poisson bootstrap error bars.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epl/counts.hpp"
#include "epl/errors.hpp"
#include "epl/parallel.hpp"
#include "epl/polcalc.hpp"
#include "epl/rng.hpp"

namespace epl::analysis {

using counts::CountRecord;
using counts::CountSetting;
using polcalc::PolState;

// ---------------------------------------------------------------------------
// Tomography settings
// ---------------------------------------------------------------------------

// One single-arm analyzer position: the wave-plate pair (HWP then QWP,
// photon traverses the QWP first) that maps the analyzed state onto the
// transmitted |H> port.
struct Analyzer1Q {
  char code;            // H, V, D, A, R, L
  double hwp_deg;
  double qwp_deg;
  PolState state;       // the analyzed (transmitted) state
  Mat proj;             // 2x2 projector onto `state`
};

inline const std::vector<Analyzer1Q>& analyzer_basis() {
  static const std::vector<Analyzer1Q> table = [] {
    std::vector<Analyzer1Q> t;
    const auto add = [&t](char code, double h, double q, PolState s) {
      t.push_back({code, h, q, s, polcalc::projector(s)});
    };
    add('H', 0.0, 0.0, polcalc::ket_h());
    add('V', 45.0, 0.0, polcalc::ket_v());
    add('D', 22.5, 45.0, polcalc::ket_d());
    add('A', 67.5, 45.0, polcalc::ket_a());
    add('R', 22.5, 0.0, polcalc::ket_r());
    add('L', 67.5, 0.0, polcalc::ket_l());
    return t;
  }();
  return table;
}

inline const Analyzer1Q& analyzer_for(char code) {
  for (const auto& a : analyzer_basis())
    if (a.code == code) return a;
  throw std::invalid_argument(std::string("analyzer_for: unknown code '") + code + "'");
}

// One two-arm tomography setting; label is signal letter then idler letter.
struct TomoSetting {
  std::string label;
  double hwp_s_deg, qwp_s_deg;
  double hwp_i_deg, qwp_i_deg;
  Mat proj_s;      // 2x2
  Mat proj_i;      // 2x2
  Mat projector;   // 4x4, proj_s x proj_i
};

// The tomography setting table: 36 = {H,V,D,A,R,L}^2 (full over-complete
// set) or 16 = {H,V,D,R}^2 (minimal informationally complete set).
inline std::vector<TomoSetting> tomo_settings(int count = 36) {
  std::string letters;
  if (count == 36)
    letters = "HVDARL";
  else if (count == 16)
    letters = "HVDR";
  else
    throw std::invalid_argument("tomo_settings: count must be 36 or 16");
  std::vector<TomoSetting> out;
  out.reserve(letters.size() * letters.size());
  for (char cs : letters) {
    for (char ci : letters) {
      const auto& s = analyzer_for(cs);
      const auto& i = analyzer_for(ci);
      TomoSetting ts;
      ts.label = std::string{cs, ci};
      ts.hwp_s_deg = s.hwp_deg;
      ts.qwp_s_deg = s.qwp_deg;
      ts.hwp_i_deg = i.hwp_deg;
      ts.qwp_i_deg = i.qwp_deg;
      ts.proj_s = s.proj;
      ts.proj_i = i.proj;
      ts.projector = polcalc::kron(s.proj, i.proj);
      out.push_back(std::move(ts));
    }
  }
  return out;
}

inline std::vector<CountSetting> tomo_count_settings(std::span<const TomoSetting> settings) {
  std::vector<CountSetting> out;
  out.reserve(settings.size());
  for (const auto& s : settings) out.push_back(CountSetting::projectors(s.label, s.proj_s, s.proj_i));
  return out;
}

// One (projector, observed count) pair; the common exposure scale is
// profiled out by the estimators, so counts need not be normalized.
struct SettingCount {
  Mat projector;  // 4x4
  double count = 0.0;
};

// Zip tomography settings with their sampled records (label-checked).
inline std::vector<SettingCount> make_setting_counts(std::span<const TomoSetting> settings,
                                                     std::span<const CountRecord> records) {
  if (settings.size() != records.size())
    throw std::invalid_argument("make_setting_counts: settings/records size mismatch");
  std::vector<SettingCount> out;
  out.reserve(settings.size());
  for (std::size_t k = 0; k < settings.size(); ++k) {
    if (records[k].setting.label != settings[k].label)
      throw std::invalid_argument("make_setting_counts: record label '" +
                                  records[k].setting.label + "' does not match setting '" +
                                  settings[k].label + "'");
    out.push_back({settings[k].projector, static_cast<double>(records[k].n_coinc)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear inversion
// ---------------------------------------------------------------------------

namespace detail {

// Orthonormal Hermitian basis B_m = (sigma_j x sigma_k)/2, m = 4 j + k,
// sigma in {I, X, Y, Z}.
inline const std::array<Mat, 16>& pauli_basis() {
  static const std::array<Mat, 16> basis = [] {
    std::array<Mat, 4> s;
    s[0] = Mat::Identity(2, 2);
    s[1] = polcalc::pauli_x().m;
    s[2] = polcalc::pauli_y().m;
    s[3] = polcalc::pauli_z().m;
    std::array<Mat, 16> b;
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) b[4 * j + k] = polcalc::kron(s[j], s[k]) / 2.0;
    return b;
  }();
  return basis;
}

// Design matrix M_km = Tr(Pi_k B_m); real because both factors are Hermitian.
inline Eigen::MatrixXd design_matrix(std::span<const SettingCount> data) {
  const auto& basis = pauli_basis();
  Eigen::MatrixXd m(data.size(), 16);
  for (std::size_t k = 0; k < data.size(); ++k)
    for (int j = 0; j < 16; ++j) m(k, j) = (data[k].projector * basis[j]).trace().real();
  return m;
}

inline void check_informationally_complete(const Eigen::MatrixXd& design) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 16)
    throw std::invalid_argument(
        "tomography: settings are not informationally complete (design rank " +
        std::to_string(qr.rank()) + " < 16)");
}

}  // namespace detail

struct LinearInversionResult {
  Mat rho;                          // Hermitian, unit trace; may be non-PSD
  double min_eigenvalue = 0.0;
  bool positive_semidefinite = false;
};

// Least-squares inversion of counts against the projector set.  The count
// scale is absorbed by fitting x = s rho unconstrained and normalizing the
// trace afterwards.  The result is exactly Hermitian but, with finite
// statistics, may carry (small) negative eigenvalues: they are reported, not
// hidden.
inline LinearInversionResult linear_inversion(std::span<const SettingCount> data) {
  if (data.empty()) throw std::invalid_argument("linear_inversion: no data");
  double total = 0.0;
  for (const auto& d : data) {
    if (!(std::isfinite(d.count) && d.count >= 0.0))
      throw std::invalid_argument("linear_inversion: counts must be finite and >= 0");
    total += d.count;
  }
  if (total <= 0.0) throw std::invalid_argument("linear_inversion: all counts are zero");

  const Eigen::MatrixXd design = detail::design_matrix(data);
  detail::check_informationally_complete(design);
  Eigen::VectorXd y(data.size());
  for (std::size_t k = 0; k < data.size(); ++k) y(k) = data[k].count;
  const Eigen::VectorXd t = Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(design).solve(y);

  const auto& basis = detail::pauli_basis();
  Mat x = Mat::Zero(4, 4);
  for (int j = 0; j < 16; ++j) x += t(j) * basis[j];
  const double tr = x.trace().real();
  if (std::abs(tr) < 1e-12 * total)
    throw std::runtime_error("linear_inversion: degenerate solution (zero trace)");
  Mat rho = x / tr;
  rho = (rho + rho.adjoint()) / 2.0;  // drop floating-point skew

  LinearInversionResult res;
  Eigen::SelfAdjointEigenSolver<Mat> es(rho, Eigen::EigenvaluesOnly);
  res.min_eigenvalue = es.eigenvalues().minCoeff();
  res.positive_semidefinite = res.min_eigenvalue >= -kPsdTol;
  res.rho = std::move(rho);
  return res;
}

// Project a Hermitian matrix onto the physical set: clip negative
// eigenvalues to zero and renormalize the trace.
inline Mat psd_project(const Mat& herm) {
  Mat h = (herm + herm.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0);
  const double tr = vals.sum();
  if (tr <= 0.0) return Mat::Identity(h.rows(), h.cols()) / static_cast<double>(h.rows());
  vals /= tr;
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().adjoint();
}

// ---------------------------------------------------------------------------
// Maximum-likelihood reconstruction
// ---------------------------------------------------------------------------

struct TomoOptions {
  int max_iterations = 5000;
  double min_gain = 1e-9;  // stop when one iteration improves log-lik by less
};

struct TomoResult {
  // Physical by construction (rho = T^dag T / tr); starts maximally mixed.
  PolState rho = PolState::mixed(0.25 * Mat::Identity(4, 4));
  double fidelity_to_target = 0.0;
  double fidelity_sigma = 0.0;     // filled by the bootstrap layer; 0 when unset
  double purity = 0.0;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  bool likelihood_monotone = true;
};

namespace detail {

// 16 real parameters <-> lower-triangular T (diagonal real), rho = T^dag T / tr.
inline Mat t_from_params(const std::array<double, 16>& p) {
  Mat t = Mat::Zero(4, 4);
  std::size_t idx = 0;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < r; ++c) {
      t(r, c) = cd(p[idx], p[idx + 1]);
      idx += 2;
    }
    t(r, r) = p[idx++];
  }
  return t;
}

inline std::array<double, 16> params_from_t(const Mat& t) {
  std::array<double, 16> p{};
  std::size_t idx = 0;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < r; ++c) {
      p[idx] = t(r, c).real();
      p[idx + 1] = t(r, c).imag();
      idx += 2;
    }
    p[idx++] = t(r, r).real();
  }
  return p;
}

// Lower-triangular T with T^dag T = rho, via a Cholesky factorization of the
// index-reversed matrix.
inline Mat lower_t_factor(const Mat& rho) {
  const int n = static_cast<int>(rho.rows());
  Mat perm = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) perm(i, n - 1 - i) = 1.0;
  Mat base = (rho + rho.adjoint()) / 2.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    const double eps = attempt == 0 ? 0.0 : std::pow(10.0, attempt - 9);
    Mat reg = (1.0 - eps) * base + eps * Mat::Identity(n, n) / static_cast<double>(n);
    Eigen::LLT<Mat> llt(Mat(perm * reg * perm));
    if (llt.info() == Eigen::Success) {
      const Mat upper = perm * Mat(llt.matrixL()) * perm;
      return upper.adjoint();
    }
  }
  throw std::runtime_error("lower_t_factor: factorization failed");
}

struct Likelihood {
  std::span<const SettingCount> data;
  double total_counts = 0.0;
  static constexpr double q_floor = 1e-18;

  // Poisson log-likelihood with the exposure scale s profiled out:
  // L = sum_k n_k log q_k - N log Q  (constants dropped).
  double value(const std::array<double, 16>& p) const {
    const Mat t = t_from_params(p);
    const Mat rho_un = t.adjoint() * t;
    const double tau = rho_un.trace().real();
    if (!(tau > 0.0)) return -std::numeric_limits<double>::infinity();
    double big_q = 0.0, ll = 0.0;
    for (const auto& d : data) {
      const double q = std::max((rho_un * d.projector).trace().real() / tau, q_floor);
      big_q += q;
      if (d.count > 0.0) ll += d.count * std::log(q);
    }
    return ll - total_counts * std::log(big_q);
  }

  // Analytic gradient: with c_k = n_k/q_k - N/Q, G = sum c_k Pi_k and
  // g = sum c_k q_k, the matrix gradient is W = (2/tau) T (G - g I); the
  // parameter gradient reads off W's real/imaginary entries.
  std::array<double, 16> gradient(const std::array<double, 16>& p) const {
    const Mat t = t_from_params(p);
    const Mat rho_un = t.adjoint() * t;
    const double tau = rho_un.trace().real();
    Mat g_mat = Mat::Zero(4, 4);
    double g_scalar = 0.0, big_q = 0.0;
    std::vector<double> qs(data.size());
    for (std::size_t k = 0; k < data.size(); ++k) {
      qs[k] = std::max((rho_un * data[k].projector).trace().real() / tau, q_floor);
      big_q += qs[k];
    }
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double c = data[k].count / qs[k] - total_counts / big_q;
      g_mat += c * data[k].projector;
      g_scalar += c * qs[k];
    }
    const Mat w = (2.0 / tau) * t * (g_mat - g_scalar * Mat::Identity(4, 4));
    std::array<double, 16> grad{};
    std::size_t idx = 0;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < r; ++c) {
        grad[idx] = w(r, c).real();
        grad[idx + 1] = w(r, c).imag();
        idx += 2;
      }
      grad[idx++] = w(r, r).real();
    }
    return grad;
  }
};

}  // namespace detail

// Maximum-likelihood tomography: ascend the Poisson log-likelihood over the
// Cholesky-style parameterization rho = T^dag T / Tr(T^dag T), which keeps
// every iterate physical.  Diagonal-preconditioned gradient ascent with
// Armijo backtracking; monotone by construction.
inline TomoResult mle_reconstruct(std::span<const SettingCount> data, const Mat& init,
                                  const PolState& target = polcalc::bell(polcalc::Bell::PhiPlus),
                                  const TomoOptions& options = {}) {
  if (data.empty()) throw std::invalid_argument("mle_reconstruct: no data");
  if (options.max_iterations < 1)
    throw std::invalid_argument("mle_reconstruct: max_iterations must be >= 1");
  double total = 0.0;
  for (const auto& d : data) {
    if (d.projector.rows() != 4 || d.projector.cols() != 4)
      throw std::invalid_argument("mle_reconstruct: projectors must be 4x4");
    if (!(std::isfinite(d.count) && d.count >= 0.0))
      throw std::invalid_argument("mle_reconstruct: counts must be finite and >= 0");
    total += d.count;
  }
  if (total <= 0.0) throw std::invalid_argument("mle_reconstruct: all counts are zero");
  detail::check_informationally_complete(detail::design_matrix(data));

  // Start from a physical version of `init`, slightly blended with I/4 so
  // the Cholesky-style factor exists and no q_k starts at the floor.
  Mat start = psd_project(init);
  start = 0.999 * start + 0.001 * Mat::Identity(4, 4) / 4.0;
  std::array<double, 16> params = detail::params_from_t(detail::lower_t_factor(start));

  const detail::Likelihood lik{data, total};
  double current = lik.value(params);

  // Diagonal preconditioner from numeric curvature, refreshed periodically.
  std::array<double, 16> precond{};
  const auto refresh_precond = [&] {
    std::array<double, 16> curv{};
    double max_curv = 0.0;
    for (int m = 0; m < 16; ++m) {
      const double delta = 1e-4 * std::max(1.0, std::abs(params[m]));
      auto plus = params, minus = params;
      plus[m] += delta;
      minus[m] -= delta;
      curv[m] = std::abs(lik.value(plus) - 2.0 * current + lik.value(minus)) / (delta * delta);
      max_curv = std::max(max_curv, curv[m]);
    }
    const double floor = std::max(1e-8 * max_curv, 1e-300);
    for (int m = 0; m < 16; ++m) precond[m] = 1.0 / std::max(curv[m], floor);
  };
  refresh_precond();

  TomoResult result;
  result.likelihood_monotone = true;
  double alpha = 1.0;
  int iter = 0;
  bool converged = false;
  for (; iter < options.max_iterations; ++iter) {
    if (iter > 0 && iter % 250 == 0) refresh_precond();
    const auto grad = lik.gradient(params);
    std::array<double, 16> dir{};
    double slope = 0.0;
    for (int m = 0; m < 16; ++m) {
      dir[m] = precond[m] * grad[m];
      slope += grad[m] * dir[m];
    }
    if (!(slope > 0.0)) {
      converged = true;  // stationary point
      break;
    }
    double step = alpha;
    double next = -std::numeric_limits<double>::infinity();
    std::array<double, 16> trial{};
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      trial = params;
      for (int m = 0; m < 16; ++m) trial[m] += step * dir[m];
      next = lik.value(trial);
      if (next >= current + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      converged = true;  // no ascent direction at representable step sizes
      break;
    }
    const double gain = next - current;
    if (gain < 0.0) result.likelihood_monotone = false;  // cannot happen by construction
    params = trial;
    current = next;
    alpha = std::min(step * 2.0, 1e6);
    if (gain < options.min_gain) {
      converged = true;
      ++iter;
      break;
    }
  }

  const Mat t = detail::t_from_params(params);
  Mat rho = t.adjoint() * t;
  rho /= rho.trace().real();
  rho = (rho + rho.adjoint()) / 2.0;

  result.rho = PolState::mixed(rho);
  result.fidelity_to_target = polcalc::fidelity(result.rho, target);
  result.purity = (rho * rho).trace().real();
  result.log_likelihood = current;
  result.iterations = iter;
  result.converged = converged;
  return result;
}

// MLE started from the PSD-projected linear inversion of the same data.
inline TomoResult mle_reconstruct(std::span<const SettingCount> data,
                                  const PolState& target = polcalc::bell(polcalc::Bell::PhiPlus),
                                  const TomoOptions& options = {}) {
  return mle_reconstruct(data, linear_inversion(data).rho, target, options);
}

// ---------------------------------------------------------------------------
// CHSH
// ---------------------------------------------------------------------------

// Analyzer angle set (degrees, Bloch plane): unprimed/primed per arm.
struct ChshAngles {
  double theta_s = 0.0;
  double theta_s_prime = 90.0;
  double theta_i = -45.0;
  double theta_i_prime = 45.0;
};

// The angles maximizing S for |phi+> under the E(theta_s, theta_i) =
// cos(theta_s - theta_i) correlation: (0, 90, -45, 45).
inline ChshAngles default_chsh_angles() { return ChshAngles{}; }

// Correlation function from the four projective outcome probabilities:
// E = p(a, b) + p(a+180, b+180) - p(a+180, b) - p(a, b+180).
inline double chsh_E(const PolState& rho, double theta_s_deg, double theta_i_deg) {
  return counts::fringe_probability(rho, theta_s_deg, theta_i_deg) +
         counts::fringe_probability(rho, theta_s_deg + 180.0, theta_i_deg + 180.0) -
         counts::fringe_probability(rho, theta_s_deg + 180.0, theta_i_deg) -
         counts::fringe_probability(rho, theta_s_deg, theta_i_deg + 180.0);
}

// S = E(s, i) + E(s', i') + E(s, i') - E(s', i).
inline double chsh_S(const PolState& rho, const ChshAngles& a = ChshAngles{}) {
  return chsh_E(rho, a.theta_s, a.theta_i) + chsh_E(rho, a.theta_s_prime, a.theta_i_prime) +
         chsh_E(rho, a.theta_s, a.theta_i_prime) - chsh_E(rho, a.theta_s_prime, a.theta_i);
}

// The 16 count settings measuring S: four correlation pairs in the order
// (s,i), (s',i'), (s,i'), (s',i), each with outcome suffixes 00, 01, 10, 11
// (0 = unrotated analyzer, 1 = +180 degrees on that arm).
inline std::vector<CountSetting> chsh_count_settings(const ChshAngles& a = ChshAngles{}) {
  const std::array<std::pair<double, double>, 4> pairs = {
      std::pair{a.theta_s, a.theta_i},
      std::pair{a.theta_s_prime, a.theta_i_prime},
      std::pair{a.theta_s, a.theta_i_prime},
      std::pair{a.theta_s_prime, a.theta_i},
  };
  std::vector<CountSetting> out;
  out.reserve(16);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [ts, ti] = pairs[p];
    const std::array<std::pair<const char*, std::pair<double, double>>, 4> terms = {
        std::pair{"00", std::pair{ts, ti}},
        std::pair{"01", std::pair{ts, ti + 180.0}},
        std::pair{"10", std::pair{ts + 180.0, ti}},
        std::pair{"11", std::pair{ts + 180.0, ti + 180.0}},
    };
    for (const auto& [suffix, angles] : terms)
      out.push_back(CountSetting::analyzers("c" + std::to_string(p) + "_" + suffix,
                                            angles.first, angles.second));
  }
  return out;
}

// S estimated from 16 records laid out as produced by chsh_count_settings.
inline double chsh_S_from_records(std::span<const CountRecord> records) {
  if (records.size() != 16)
    throw std::invalid_argument("chsh_S_from_records: expected 16 records (got " +
                                std::to_string(records.size()) + ")");
  std::array<double, 4> e{};
  for (int p = 0; p < 4; ++p) {
    const double n00 = static_cast<double>(records[4 * p + 0].n_coinc);
    const double n01 = static_cast<double>(records[4 * p + 1].n_coinc);
    const double n10 = static_cast<double>(records[4 * p + 2].n_coinc);
    const double n11 = static_cast<double>(records[4 * p + 3].n_coinc);
    const double sum = n00 + n01 + n10 + n11;
    if (sum <= 0.0)
      throw std::domain_error("chsh_S_from_records: correlation pair " + std::to_string(p) +
                              " has zero total counts");
    e[p] = (n00 + n11 - n01 - n10) / sum;
  }
  return e[0] + e[1] + e[2] - e[3];
}

// ---------------------------------------------------------------------------
// Bootstrap
// ---------------------------------------------------------------------------

struct BootstrapStats {
  double mean = 0.0;
  double sigma = 0.0;  // sample standard deviation over resamples
};

// Poisson bootstrap: each resample redraws every count with the observed
// value as its mean, then re-runs the estimator.  Resample r uses substream
// (seed, r); results are independent of the thread count.
template <typename Estimator>
BootstrapStats bootstrap(std::span<const CountRecord> records, Estimator&& estimator,
                         int n_resamples, std::uint64_t seed) {
  if (n_resamples < 1) throw std::invalid_argument("bootstrap: need at least 1 resample");
  std::vector<double> values(static_cast<std::size_t>(n_resamples));
  parallel_for(values.size(), [&](std::size_t r) {
    auto gen = rng::substream(seed, r);
    std::vector<CountRecord> resampled(records.begin(), records.end());
    for (auto& rec : resampled) {
      rec.n_signal = rng::poisson(static_cast<double>(rec.n_signal), gen);
      rec.n_idler = rng::poisson(static_cast<double>(rec.n_idler), gen);
      rec.n_coinc = rng::poisson(static_cast<double>(rec.n_coinc), gen);
    }
    values[r] = estimator(std::span<const CountRecord>(resampled));
  });
  BootstrapStats stats;
  for (double v : values) stats.mean += v;
  stats.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - stats.mean) * (v - stats.mean);
    stats.sigma = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return stats;
}

struct ChshResult {
  ChshAngles angles;
  double S = 0.0;
  double sigma = 0.0;
  std::optional<double> sigmas_above_2;  // (S - 2) / sigma when sigma > 0
  int n_resamples = 0;
};

// Estimate S from records with a bootstrap error bar and a physical-range
// sanity check (|S| must not exceed 2 sqrt(2) beyond statistical slack).
inline ChshResult chsh_result(std::span<const CountRecord> records, const ChshAngles& angles,
                              int n_resamples, std::uint64_t seed) {
  ChshResult res;
  res.angles = angles;
  res.S = chsh_S_from_records(records);
  res.n_resamples = n_resamples;
  if (n_resamples >= 2) {
    const auto stats =
        bootstrap(records, [](std::span<const CountRecord> r) { return chsh_S_from_records(r); },
                  n_resamples, seed);
    res.sigma = stats.sigma;
  }
  const double bound = 2.0 * std::numbers::sqrt2 + std::max(3.0 * res.sigma, 1e-9);
  if (std::abs(res.S) > bound)
    throw std::domain_error("chsh_result: |S| = " + std::to_string(std::abs(res.S)) +
                            " exceeds the physical bound");
  if (res.sigma > 0.0) res.sigmas_above_2 = (res.S - 2.0) / res.sigma;
  return res;
}

}  // namespace epl::analysis
