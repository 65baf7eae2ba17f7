#pragma once

// Exact finite-dimensional polarization/path calculus: kets and density
// matrices over one to three two-level modes, wave-plate Jones operators,
// analyzer states, Bell states, tensor composition, partial trace, and
// fidelity.
//
// Index convention: mode 0 occupies the most significant bit of the flat
// index, so tensor(a, b) lays out a's modes before b's.  For a single
// polarization mode, index 0 = |H>, index 1 = |V>.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "epl/errors.hpp"

namespace epl {

using cd = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;

// Tolerance for identities that hold exactly in the algebra (unitarity,
// normalization, Hermiticity, trace).
inline constexpr double kAlgebraTol = 1e-12;
// Tolerance for eigenvalue positivity of density matrices.
inline constexpr double kPsdTol = 1e-10;

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

// Canonicalize an angle in degrees into [0, 360).
inline double canonical_deg(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0.0) r += 360.0;
  if (r == 0.0) r = 0.0;  // normalize -0.0
  if (r >= 360.0) r = 0.0;  // fmod rounding at the boundary
  return r;
}

namespace polcalc {

// Kronecker product of dynamically sized complex matrices.
inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// ---------------------------------------------------------------------------
// Unitaries
// ---------------------------------------------------------------------------

template <int N>
struct Unitary {
  static_assert(N >= 2, "Unitary needs dimension >= 2");
  using Matrix = Eigen::Matrix<cd, N, N>;

  Matrix m;

  explicit Unitary(Matrix u) : m(std::move(u)) {
    const double err = (m.adjoint() * m - Matrix::Identity()).cwiseAbs().maxCoeff();
    if (!(err <= kAlgebraTol))
      throw std::invalid_argument("Unitary: U^dagger U deviates from identity by " +
                                  std::to_string(err));
  }

  Matrix adjoint() const { return m.adjoint(); }
};

using Unitary2 = Unitary<2>;
using Unitary4 = Unitary<4>;
using Unitary8 = Unitary<8>;

template <int N>
Unitary<N> operator*(const Unitary<N>& a, const Unitary<N>& b) {
  return Unitary<N>(typename Unitary<N>::Matrix(a.m * b.m));
}

template <int A, int B>
Unitary<A * B> tensor(const Unitary<A>& a, const Unitary<B>& b) {
  typename Unitary<A * B>::Matrix out;
  for (int i = 0; i < A; ++i)
    for (int j = 0; j < A; ++j)
      out.template block<B, B>(i * B, j * B) = a.m(i, j) * b.m;
  return Unitary<A * B>(out);
}

inline Unitary2 identity2() { return Unitary2(Mat2::Identity()); }

inline Unitary2 pauli_x() {
  Mat2 m;
  m << 0, 1, 1, 0;
  return Unitary2(m);
}

inline Unitary2 pauli_y() {
  Mat2 m;
  m << 0, cd(0, -1), cd(0, 1), 0;
  return Unitary2(m);
}

inline Unitary2 pauli_z() {
  Mat2 m;
  m << 1, 0, 0, -1;
  return Unitary2(m);
}

// Jones operator of a half-wave plate with its fast axis at `angle_deg` from
// horizontal: [[cos 2h, sin 2h], [sin 2h, -cos 2h]].
inline Unitary2 hwp(double angle_deg) {
  if (!std::isfinite(angle_deg)) throw std::invalid_argument("hwp: angle must be finite");
  const double two_h = 2.0 * deg2rad(angle_deg);
  Mat2 m;
  m << std::cos(two_h), std::sin(two_h), std::sin(two_h), -std::cos(two_h);
  return Unitary2(m);
}

// Quarter-wave plate under the same fast-axis convention:
// R(q) diag(1, -i) R(-q).  With this retardance sign, qwp(45)|H> is the
// right-circular state (|H> + i|V>)/sqrt(2) and hwp(h) = qwp(h) qwp(h)
// exactly (two quarter-wave passes make a half-wave plate).
inline Unitary2 qwp(double angle_deg) {
  if (!std::isfinite(angle_deg)) throw std::invalid_argument("qwp: angle must be finite");
  const double q = deg2rad(angle_deg);
  Eigen::Matrix2d rot;
  rot << std::cos(q), -std::sin(q), std::sin(q), std::cos(q);
  Mat2 retard;
  retard << 1, 0, 0, cd(0, -1);
  return Unitary2(Mat2(rot * retard * rot.transpose()));
}

// ---------------------------------------------------------------------------
// States
// ---------------------------------------------------------------------------

// A pure ket or a density matrix over 1..3 two-level modes.  Construction
// enforces the representation invariants: kets are normalized; density
// matrices are Hermitian, unit-trace, and positive semidefinite within
// kPsdTol.
class PolState {
 public:
  static PolState pure(Vec amplitudes) {
    PolState s(infer_modes(amplitudes.size()), /*pure=*/true);
    const double norm_err = std::abs(amplitudes.squaredNorm() - 1.0);
    if (!(norm_err <= kAlgebraTol))
      throw std::invalid_argument("PolState::pure: ket norm deviates from 1 by " +
                                  std::to_string(norm_err));
    s.amps_ = std::move(amplitudes);
    return s;
  }

  static PolState mixed(Mat rho) {
    if (rho.rows() != rho.cols())
      throw std::invalid_argument("PolState::mixed: density matrix must be square");
    PolState s(infer_modes(rho.rows()), /*pure=*/false);
    const double herm_err = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    if (!(herm_err <= kAlgebraTol))
      throw std::invalid_argument("PolState::mixed: not Hermitian (deviation " +
                                  std::to_string(herm_err) + ")");
    const cd tr = rho.trace();
    if (!(std::abs(tr - cd(1.0, 0.0)) <= kAlgebraTol))
      throw std::invalid_argument("PolState::mixed: trace deviates from 1 by " +
                                  std::to_string(std::abs(tr - cd(1.0, 0.0))));
    Eigen::SelfAdjointEigenSolver<Mat> es(rho, Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    if (!(min_eig >= -kPsdTol))
      throw std::invalid_argument("PolState::mixed: negative eigenvalue " +
                                  std::to_string(min_eig));
    s.rho_ = std::move(rho);
    return s;
  }

  bool is_pure() const { return pure_; }
  int modes() const { return n_modes_; }
  int dim() const { return 1 << n_modes_; }
  std::vector<int> dims() const { return std::vector<int>(n_modes_, 2); }

  const Vec& amplitudes() const {
    if (!pure_) throw std::logic_error("PolState::amplitudes: state is mixed");
    return amps_;
  }

  const Mat& density() const {
    if (pure_) throw std::logic_error("PolState::density: state is pure (use density_matrix)");
    return rho_;
  }

  // Density-matrix view of either representation.
  Mat density_matrix() const {
    if (pure_) return amps_ * amps_.adjoint();
    return rho_;
  }

  PolState as_mixed() const {
    if (!pure_) return *this;
    return PolState::mixed(density_matrix());
  }

 private:
  PolState(int n_modes, bool pure) : n_modes_(n_modes), pure_(pure) {}

  static int infer_modes(Eigen::Index dim) {
    switch (dim) {
      case 2: return 1;
      case 4: return 2;
      case 8: return 3;
      default:
        throw std::invalid_argument("PolState: dimension must be 2, 4, or 8 (got " +
                                    std::to_string(dim) + ")");
    }
  }

  int n_modes_;
  bool pure_;
  Vec amps_;
  Mat rho_;
};

template <int N>
PolState apply(const Unitary<N>& u, const PolState& s) {
  if (N != s.dim())
    throw std::invalid_argument("apply: operator dimension " + std::to_string(N) +
                                " does not match state dimension " + std::to_string(s.dim()));
  if (s.is_pure()) return PolState::pure(Vec(u.m * s.amplitudes()));
  return PolState::mixed(Mat(u.m * s.density() * u.m.adjoint()));
}

inline PolState tensor(const PolState& a, const PolState& b) {
  if (a.modes() + b.modes() > 3)
    throw std::invalid_argument("tensor: composite states are limited to 3 modes");
  if (a.is_pure() && b.is_pure()) {
    Vec out(a.dim() * b.dim());
    for (int i = 0; i < a.dim(); ++i)
      for (int j = 0; j < b.dim(); ++j) out(i * b.dim() + j) = a.amplitudes()(i) * b.amplitudes()(j);
    return PolState::pure(std::move(out));
  }
  return PolState::mixed(kron(a.density_matrix(), b.density_matrix()));
}

// Trace out all modes not listed in `keep`; the kept modes retain their
// original relative order.  Always returns a mixed state.
inline PolState partial_trace(const PolState& state, std::span<const int> keep) {
  const int n = state.modes();
  std::vector<int> kept(keep.begin(), keep.end());
  std::sort(kept.begin(), kept.end());
  if (kept.empty()) throw std::invalid_argument("partial_trace: must keep at least one mode");
  if (std::adjacent_find(kept.begin(), kept.end()) != kept.end())
    throw std::invalid_argument("partial_trace: duplicate mode index");
  if (kept.front() < 0 || kept.back() >= n)
    throw std::invalid_argument("partial_trace: mode index out of range");

  std::vector<int> traced;
  for (int m = 0; m < n; ++m)
    if (!std::binary_search(kept.begin(), kept.end(), m)) traced.push_back(m);
  if (traced.empty()) return state.as_mixed();

  const Mat rho = state.density_matrix();
  const int kd = 1 << kept.size();
  const int td = 1 << traced.size();
  // Compose a flat index from the kept-mode bits and the traced-mode bits.
  const auto embed = [&](int kbits, int tbits) {
    int idx = 0;
    for (std::size_t p = 0; p < kept.size(); ++p)
      if ((kbits >> (kept.size() - 1 - p)) & 1) idx |= 1 << (n - 1 - kept[p]);
    for (std::size_t p = 0; p < traced.size(); ++p)
      if ((tbits >> (traced.size() - 1 - p)) & 1) idx |= 1 << (n - 1 - traced[p]);
    return idx;
  };

  Mat out = Mat::Zero(kd, kd);
  for (int a = 0; a < kd; ++a)
    for (int b = 0; b < kd; ++b)
      for (int t = 0; t < td; ++t) out(a, b) += rho(embed(a, t), embed(b, t));
  return PolState::mixed(std::move(out));
}

// Tr(rho O), or <psi|O|psi> for pure states.
inline cd trace_with(const PolState& s, const Mat& op) {
  if (op.rows() != s.dim() || op.cols() != s.dim())
    throw std::invalid_argument("trace_with: operator/state dimension mismatch");
  if (s.is_pure()) return (s.amplitudes().adjoint() * op * s.amplitudes())(0);
  return (s.density() * op).trace();
}

// Born-rule probability of a projector (real part of the trace).
inline double probability(const PolState& s, const Mat& projector) {
  return trace_with(s, projector).real();
}

// <psi|rho|psi> for a pure reference |psi>.  Values are clipped to [0, 1]
// only when they lie within kPsdTol of the bounds; larger excursions signal
// corrupted inputs and throw.
inline double fidelity(const PolState& rho, const PolState& psi) {
  if (!psi.is_pure()) throw std::invalid_argument("fidelity: reference state must be pure");
  if (rho.dim() != psi.dim()) throw std::invalid_argument("fidelity: dimension mismatch");
  double f = 0.0;
  if (rho.is_pure()) {
    f = std::norm((psi.amplitudes().adjoint() * rho.amplitudes())(0));
  } else {
    f = ((psi.amplitudes().adjoint() * rho.density() * psi.amplitudes())(0)).real();
  }
  if (f < 0.0) {
    if (f < -kPsdTol) throw std::domain_error("fidelity: value " + std::to_string(f) + " below 0");
    f = 0.0;
  } else if (f > 1.0) {
    if (f > 1.0 + kPsdTol) throw std::domain_error("fidelity: value " + std::to_string(f) + " above 1");
    f = 1.0;
  }
  return f;
}

// <a|b> for pure states.
inline cd overlap(const PolState& a, const PolState& b) {
  if (!a.is_pure() || !b.is_pure()) throw std::invalid_argument("overlap: both states must be pure");
  if (a.dim() != b.dim()) throw std::invalid_argument("overlap: dimension mismatch");
  return (a.amplitudes().adjoint() * b.amplitudes())(0);
}

inline Mat projector(const PolState& psi) {
  if (!psi.is_pure()) throw std::invalid_argument("projector: state must be pure");
  return psi.amplitudes() * psi.amplitudes().adjoint();
}

// ---------------------------------------------------------------------------
// Standard kets
// ---------------------------------------------------------------------------

namespace detail {
inline PolState ket2(cd a0, cd a1) {
  Vec v(2);
  v << a0, a1;
  return PolState::pure(std::move(v));
}
}  // namespace detail

inline PolState ket_h() { return detail::ket2(1, 0); }
inline PolState ket_v() { return detail::ket2(0, 1); }
inline PolState ket_d() { return detail::ket2(std::numbers::sqrt2 / 2, std::numbers::sqrt2 / 2); }
inline PolState ket_a() { return detail::ket2(std::numbers::sqrt2 / 2, -std::numbers::sqrt2 / 2); }
inline PolState ket_r() { return detail::ket2(std::numbers::sqrt2 / 2, cd(0, std::numbers::sqrt2 / 2)); }
inline PolState ket_l() { return detail::ket2(std::numbers::sqrt2 / 2, cd(0, -std::numbers::sqrt2 / 2)); }

enum class Bell { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

inline PolState bell(Bell which) {
  Vec v = Vec::Zero(4);
  const double r = std::numbers::sqrt2 / 2;
  switch (which) {
    case Bell::PhiPlus: v(0) = r; v(3) = r; break;
    case Bell::PhiMinus: v(0) = r; v(3) = -r; break;
    case Bell::PsiPlus: v(1) = r; v(2) = r; break;
    case Bell::PsiMinus: v(1) = r; v(2) = -r; break;
  }
  return PolState::pure(std::move(v));
}

inline std::string bell_name(Bell which) {
  switch (which) {
    case Bell::PhiPlus: return "phi+";
    case Bell::PhiMinus: return "phi-";
    case Bell::PsiPlus: return "psi+";
    case Bell::PsiMinus: return "psi-";
  }
  throw std::logic_error("bell_name: bad enum");
}

inline Bell parse_bell(std::string_view name) {
  if (name == "phi+") return Bell::PhiPlus;
  if (name == "phi-") return Bell::PhiMinus;
  if (name == "psi+") return Bell::PsiPlus;
  if (name == "psi-") return Bell::PsiMinus;
  throw std::invalid_argument("parse_bell: unknown label '" + std::string(name) +
                              "' (expected phi+, phi-, psi+, psi-)");
}

inline constexpr std::array<Bell, 4> kBellOrder = {Bell::PhiPlus, Bell::PhiMinus,
                                                   Bell::PsiPlus, Bell::PsiMinus};

// Werner-form state p |phi+><phi+| + (1 - p) I/4.  Physical for
// p in [-1/3, 1], fidelity to |phi+> is (1 + 3p)/4.
inline PolState werner(double p) {
  if (!(p >= -1.0 / 3.0 && p <= 1.0))
    throw std::invalid_argument("werner: weight must lie in [-1/3, 1]");
  const Mat phi = bell(Bell::PhiPlus).density_matrix();
  return PolState::mixed(Mat(p * phi + (1.0 - p) * Mat::Identity(4, 4) / 4.0));
}

// ---------------------------------------------------------------------------
// Analyzer parameterization
// ---------------------------------------------------------------------------

// |psi_theta> = cos(theta/2)|H> + sin(theta/2)|V>.  theta is the equatorial
// Bloch-plane parameter: theta = 0 is H, 90 is D, 180 is V, 270 is A.  The
// physical half-wave-plate angle realizing |psi_theta><psi_theta| detection
// is theta/4.
inline PolState analyzer_state(double theta_deg) {
  if (!std::isfinite(theta_deg)) throw std::invalid_argument("analyzer_state: angle must be finite");
  const double half = deg2rad(theta_deg) / 2.0;
  return detail::ket2(std::cos(half), std::sin(half));
}

inline Mat analyzer_projector(double theta_deg) { return projector(analyzer_state(theta_deg)); }

inline double bloch_from_hwp_angle(double hwp_deg) { return 4.0 * hwp_deg; }
inline double hwp_angle_from_bloch(double theta_deg) { return theta_deg / 4.0; }

// A pair of analyzer angles (signal, idler) in Bloch-plane degrees,
// canonicalized into [0, 360).
struct AnalyzerSetting {
  double theta_s_deg = 0.0;
  double theta_i_deg = 0.0;

  AnalyzerSetting(double ts, double ti) {
    if (!std::isfinite(ts) || !std::isfinite(ti))
      throw std::invalid_argument("AnalyzerSetting: angles must be finite");
    theta_s_deg = canonical_deg(ts);
    theta_i_deg = canonical_deg(ti);
  }
};

}  // namespace polcalc
}  // namespace epl
