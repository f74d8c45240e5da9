#pragma once

// Gaussian (first and second moment) dynamics of a particle in a harmonic
// potential coupled to a series RLC circuit under the Lindblad master
// equation with operator L = (sqrt(4 L k T)/hbar) Q + i Phi / sqrt(4 L k T).
//
// For x = (z, p, Q, Phi) the moments obey
//   d<x>/dt = A <x>,   dSigma/dt = A Sigma + Sigma A^T + D,
// with Sigma the symmetrised covariance. The Lindblad and anticommutator
// terms together damp only Phi (rate Gamma) and diffuse
//   D_PhiPhi = 2 Gamma L k T_R,   D_QQ = Gamma hbar^2 / (8 L k T_R),
// the latter being the low-temperature correction, switched by
// `quantum_diffusion`.
//
// Internally everything is evaluated in oscillator units
// (z0 = sqrt(hbar / M w_z), p0 = sqrt(hbar M w_z), and likewise for the
// circuit with L, w_LC), where A and D are O(1).

#include <algorithm>
#include <cmath>
#include <complex>
#include <utility>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "levem/core_model.hpp"
#include "levem/dynamics.hpp"

namespace levem {

using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;

struct GaussianState {
  Vec4 mean = Vec4::Zero();
  Mat4 cov = Mat4::Zero();
};

struct QuantumModel {
  double mass = 0.0;
  double charge = 0.0;  // [C]
  double d = 0.0;
  double omega_z = 0.0;
  double inductance = 0.0;
  double capacitance = 0.0;
  double gamma = 0.0;
  double temperature = 0.0;
  bool quantum_diffusion = true;

  double omega_lc() const { return 1.0 / std::sqrt(inductance * capacitance); }

  /// Oscillator length / momentum scales (z0, p0, Q0, Phi0).
  Vec4 scales() const {
    const double wlc = omega_lc();
    return {std::sqrt(kHbar / (mass * omega_z)), std::sqrt(kHbar * mass * omega_z),
            std::sqrt(kHbar / (inductance * wlc)), std::sqrt(kHbar * inductance * wlc)};
  }
};

/// Builds the model; only the harmonic potential and a series circuit are
/// defined for the master equation.
inline QuantumModel make_quantum_model(const ParticleSpec& p, const TrapConfig& trap, const Circuit& c,
                                       double omega_z, Potential potential, bool quantum_diffusion = true) {
  if (potential != Potential::Harmonic) {
    throw UnsupportedPotential("moment equations require a harmonic potential");
  }
  if (c.topology != Topology::Series) {
    throw InvalidParameter("moment equations are defined for the series circuit only");
  }
  if (!(omega_z > 0.0)) throw InvalidParameter("omega_z must be positive");
  return {p.mass(), p.charge(), trap.d, omega_z, c.inductance, c.capacitance, c.gamma, c.temperature,
          quantum_diffusion};
}

/// Gibbs state of an uncoupled oscillator (mass, omega) at temperature T.
/// quantum: coth form; otherwise equipartition.
inline std::pair<double, double> thermal_variances(double mass, double omega, double temperature, bool quantum) {
  double energy;  // mean energy per oscillator
  if (quantum) {
    const double x = kHbar * omega / (2.0 * kBoltzmann * temperature);
    energy = 0.5 * kHbar * omega / std::tanh(x);
  } else {
    energy = kBoltzmann * temperature;
  }
  return {energy / (mass * omega * omega), energy * mass};
}

struct MomentGenerators {
  Mat4 drift = Mat4::Zero();      // A
  Mat4 diffusion = Mat4::Zero();  // D
};

/// A and D in SI units.
inline MomentGenerators moment_generators(const QuantumModel& m) {
  MomentGenerators g;
  Mat4& a = g.drift;
  const double k = m.charge / (m.capacitance * m.d);
  a(0, 1) = 1.0 / m.mass;
  a(1, 0) = -m.mass * m.omega_z * m.omega_z;
  a(1, 2) = -k;
  a(2, 3) = 1.0 / m.inductance;
  a(3, 2) = -1.0 / m.capacitance;
  a(3, 0) = -k;
  a(3, 3) = -m.gamma;
  const double kT = kBoltzmann * m.temperature;
  g.diffusion(3, 3) = 2.0 * m.gamma * m.inductance * kT;
  if (m.quantum_diffusion && m.gamma > 0.0) {
    if (!(kT > 0.0)) throw InvalidParameter("quantum diffusion requires T_R > 0");
    g.diffusion(2, 2) = m.gamma * kHbar * kHbar / (8.0 * m.inductance * kT);
  }
  return g;
}

/// The same generators in oscillator units: A' = S^-1 A S, D' = S^-1 D S^-1.
inline MomentGenerators scaled_generators(const QuantumModel& m) {
  const MomentGenerators si = moment_generators(m);
  const Vec4 s = m.scales();
  MomentGenerators g;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      g.drift(i, j) = si.drift(i, j) * s(j) / s(i);
      g.diffusion(i, j) = si.diffusion(i, j) / (s(i) * s(j));
    }
  }
  return g;
}

inline GaussianState to_scaled(const GaussianState& x, const Vec4& s) {
  GaussianState y;
  y.mean = x.mean.cwiseQuotient(s);
  y.cov = x.cov.cwiseQuotient(s * s.transpose());
  return y;
}

inline GaussianState from_scaled(const GaussianState& y, const Vec4& s) {
  GaussianState x;
  x.mean = y.mean.cwiseProduct(s);
  x.cov = y.cov.cwiseProduct(s * s.transpose());
  return x;
}

/// Exact propagation over time t: mean via exp(A t), covariance via the
/// Van Loan block exponential, which needs no steady state. The block holds
/// exp(-A t), so long times are split into chunks with |Re lambda| t <= 1.
inline GaussianState propagate_scaled(const GaussianState& y, const MomentGenerators& g, double t) {
  Eigen::EigenSolver<Mat4> es(g.drift, false);
  double rate = 0.0;
  for (int i = 0; i < 4; ++i) rate = std::max(rate, std::abs(es.eigenvalues()(i).real()));
  const long chunks = std::max(1L, static_cast<long>(std::ceil(rate * std::abs(t))));
  const double h = t / chunks;
  Eigen::Matrix<double, 8, 8> block = Eigen::Matrix<double, 8, 8>::Zero();
  block.topLeftCorner<4, 4>() = -g.drift * h;
  block.topRightCorner<4, 4>() = g.diffusion * h;
  block.bottomRightCorner<4, 4>() = g.drift.transpose() * h;
  const Eigen::Matrix<double, 8, 8> e = block.exp();
  const Mat4 phi = e.bottomRightCorner<4, 4>().transpose();  // exp(A h)
  const Mat4 noise = phi * e.topRightCorner<4, 4>();
  GaussianState out = y;
  for (long k = 0; k < chunks; ++k) {
    out.mean = phi * out.mean;
    out.cov = phi * out.cov * phi.transpose() + noise;
    out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  }
  return out;
}

inline GaussianState propagate(const GaussianState& x, const QuantumModel& m, double t) {
  const Vec4 s = m.scales();
  const double w = m.omega_z;
  // Dimensionless time in units of 1/w_z.
  MomentGenerators g = scaled_generators(m);
  g.drift /= w;
  g.diffusion /= w;
  return from_scaled(propagate_scaled(to_scaled(x, s), g, t * w), s);
}

/// Eigenvalues of the drift matrix (SI, 1/s).
inline Eigen::Matrix<std::complex<double>, 4, 1> drift_spectrum(const QuantumModel& m) {
  const MomentGenerators g = scaled_generators(m);
  Eigen::EigenSolver<Mat4> es(g.drift, false);
  return es.eigenvalues();
}

inline bool is_hurwitz(const QuantumModel& m) {
  const auto ev = drift_spectrum(m);
  const double tol = 1e-12 * m.omega_z;
  for (int i = 0; i < 4; ++i) {
    if (!(ev(i).real() < -tol)) return false;
  }
  return true;
}

/// Solves A X + X A^T + D = 0 for symmetric X by vectorising its
/// n (n + 1) / 2 independent entries.
template <int n>
Eigen::Matrix<double, n, n> solve_lyapunov(const Eigen::Matrix<double, n, n>& a,
                                           const Eigen::Matrix<double, n, n>& d) {
  using Mat = Eigen::Matrix<double, n, n>;
  constexpr int m = n * (n + 1) / 2;
  int idx[n][n];
  int c = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) idx[i][j] = idx[j][i] = c++;
  }
  Eigen::Matrix<double, m, m> sys = Eigen::Matrix<double, m, m>::Zero();
  Eigen::Matrix<double, m, 1> rhs;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      Mat basis = Mat::Zero();
      basis(i, j) = basis(j, i) = 1.0;
      const Mat img = a * basis + basis * a.transpose();
      for (int r = 0; r < n; ++r) {
        for (int s = r; s < n; ++s) sys(idx[r][s], idx[i][j]) = img(r, s);
      }
    }
  }
  for (int r = 0; r < n; ++r) {
    for (int s = r; s < n; ++s) rhs(idx[r][s]) = -d(r, s);
  }
  const Eigen::Matrix<double, m, 1> sol = sys.fullPivLu().solve(rhs);
  Mat x;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) x(i, j) = sol(idx[i][j]);
  }
  return x;
}

/// Stationary Gaussian state. Requires every drift eigenvalue to have a
/// negative real part.
inline GaussianState steady_state(const QuantumModel& m) {
  if (!is_hurwitz(m)) {
    throw NoSteadyState("drift matrix is not Hurwitz (undamped mode, e.g. uncharged particle)");
  }
  const MomentGenerators g = scaled_generators(m);
  GaussianState y;
  y.cov = solve_lyapunov<4>(g.drift, g.diffusion);
  return from_scaled(y, m.scales());
}

/// Stationary state for an uncharged particle, where the particle block of
/// A is undamped: the circuit block is the Lyapunov solution and the
/// particle is taken to be thermal at T_R.
inline GaussianState steady_state_uncoupled(const QuantumModel& m) {
  if (m.charge != 0.0) throw InvalidParameter("steady_state_uncoupled: particle must be uncharged");
  const MomentGenerators g = scaled_generators(m);
  const Eigen::Matrix2d a = g.drift.bottomRightCorner<2, 2>();
  const Eigen::Matrix2d d = g.diffusion.bottomRightCorner<2, 2>();
  if (!(m.gamma > 0.0)) throw NoSteadyState("circuit is undamped (Gamma = 0)");
  GaussianState y;
  y.cov.bottomRightCorner<2, 2>() = solve_lyapunov<2>(a, d);
  GaussianState x = from_scaled(y, m.scales());
  const auto [zz, pp] = thermal_variances(m.mass, m.omega_z, m.temperature, m.quantum_diffusion);
  x.cov(0, 0) = zz;
  x.cov(1, 1) = pp;
  return x;
}

/// ||A S + S A^T + D|| / ||D|| in oscillator units.
inline double lyapunov_residual(const QuantumModel& m, const GaussianState& x) {
  const MomentGenerators g = scaled_generators(m);
  const Mat4 s = to_scaled(x, m.scales()).cov;
  return (g.drift * s + s * g.drift.transpose() + g.diffusion).norm() / g.diffusion.norm();
}

/// Mean phonon number of the particle mode, E / (hbar w_z) - 1/2, from the
/// covariance alone.
inline double occupancy(const GaussianState& x, double omega_z, double mass) {
  const double energy = x.cov(1, 1) / (2.0 * mass) + 0.5 * mass * omega_z * omega_z * x.cov(0, 0);
  return energy / (kHbar * omega_z) - 0.5;
}

/// Symplectic eigenvalues (ascending) of the covariance in units of hbar.
/// Physical states have every value >= 1/2.
inline Eigen::Vector2d symplectic_eigenvalues(const GaussianState& x, const QuantumModel& m) {
  const Mat4 s = to_scaled(x, m.scales()).cov;
  Mat4 j = Mat4::Zero();
  j(0, 1) = 1.0;
  j(1, 0) = -1.0;
  j(2, 3) = 1.0;
  j(3, 2) = -1.0;
  Eigen::EigenSolver<Mat4> es(j * s, false);
  Eigen::Vector4d mags;
  for (int i = 0; i < 4; ++i) mags(i) = std::abs(es.eigenvalues()(i).imag());
  std::sort(mags.data(), mags.data() + 4);
  return {mags(0), mags(2)};
}

}  // namespace levem
