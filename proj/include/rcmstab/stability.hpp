#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rcmstab/chain.hpp"

namespace rcmstab {

class StabilityDomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The matrix governing the Lyapunov rate under the erroneous-pseudoinverse
/// control law: Vdot = -alpha * v' Qt M Qt' v with Qt built from the readings.
/// Depends on the true/reading insertion and pitch values and the roll error.
inline Eigen::Matrix4d matrix_M(double q2, double q3, double qt2, double qt3,
                                double e4) {
  const double ct2 = std::cos(qt2);
  if (qt3 == 0.0 || std::abs(ct2) < 1e-12) {
    throw StabilityDomainError("matrix_M undefined at cos(qt2) = 0 or qt3 = 0");
  }
  const double rw = (q3 * std::cos(q2)) / (qt3 * ct2);
  const double r3 = q3 / qt3;
  const double ce = std::cos(e4), se = std::sin(e4);
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(0, 0) = rw * ce;
  m(0, 1) = r3 * se;
  m(1, 0) = -rw * se;
  m(1, 1) = r3 * ce;
  return m;
}

/// Hessian of the quadratic form x' M x, built symmetric by construction.
inline Eigen::Matrix4d hessian_H(double q2, double q3, double qt2, double qt3,
                                 double e4) {
  const double ct2 = std::cos(qt2);
  if (qt3 == 0.0 || std::abs(ct2) < 1e-12) {
    throw StabilityDomainError("hessian_H undefined at cos(qt2) = 0 or qt3 = 0");
  }
  const double ratio = std::cos(q2) / ct2;
  const double r3 = q3 / qt3;
  const double ce = std::cos(e4), se = std::sin(e4);
  Eigen::Matrix4d h = Eigen::Matrix4d::Identity() * 2.0;
  h(0, 0) = 2.0 * r3 * ratio * ce;
  h(0, 1) = r3 * (1.0 - ratio) * se;
  h(1, 0) = h(0, 1);
  h(1, 1) = 2.0 * r3 * ce;
  return h;
}

struct SylvesterResult {
  bool positive_definite = false;
  std::array<double, 4> minors{};
};

/// Leading-principal-minor test for positive definiteness.
inline SylvesterResult sylvester_pd(const Eigen::Matrix4d& h, double sym_tol = 1e-9) {
  if ((h - h.transpose()).cwiseAbs().maxCoeff() > sym_tol) {
    throw std::invalid_argument("sylvester_pd requires a symmetric matrix");
  }
  SylvesterResult out;
  out.minors[0] = h(0, 0);
  out.minors[1] = h.topLeftCorner<2, 2>().determinant();
  out.minors[2] = h.topLeftCorner<3, 3>().determinant();
  out.minors[3] = h.determinant();
  out.positive_definite = out.minors[0] > 0.0 && out.minors[1] > 0.0 &&
                          out.minors[2] > 0.0 && out.minors[3] > 0.0;
  return out;
}

/// -alpha * v' Qt M Qt' v: the exact Lyapunov rate of the linear+roll error
/// under the erroneous-pseudoinverse dynamics.
inline double lyapunov_rate(const Eigen::Vector4d& v, double q2, double q3,
                            double qt2, double qt3, double qt4, double e4,
                            double alpha) {
  const Eigen::Matrix4d qt = q_factor(qt4);
  const Eigen::Vector4d y = qt.transpose() * v;
  return -alpha * y.dot(matrix_M(q2, q3, qt2, qt3, e4) * y);
}

inline double lyapunov_value(const Eigen::Vector4d& v) { return 0.5 * v.squaredNorm(); }

struct TauResult {
  double tau = 0.0;              // radians, from the authoritative grid search
  double tau_closed_form = 0.0;  // radians, from the 2x2 minor condition
  double q2_binding = 0.0;
  double qt2_binding = 0.0;
  double grid_resolution = 0.0;
};

/// Largest roll error that keeps H positive definite for one (q2, qt2) pair;
/// the insertion ratio scales the minors positively and cannot change the sign.
inline double pd_breakdown_e4(double q2, double qt2) {
  double lo = 0.0, hi = kPi / 2.0;
  if (!sylvester_pd(hessian_H(q2, 1.0, qt2, 1.0, 0.0)).positive_definite) return 0.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (sylvester_pd(hessian_H(q2, 1.0, qt2, 1.0, mid)).positive_definite) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

/// tan^2(tau) = 4 r / (1 - r)^2 at the extreme cosine ratio achievable within
/// the pitch limits, intersected with cos(e4) > 0.
inline double closed_form_tau(double pitch_lo, double pitch_hi) {
  if (!(pitch_lo <= pitch_hi) || pitch_lo <= -kPi / 2.0 || pitch_hi >= kPi / 2.0) {
    throw std::invalid_argument("pitch limits must lie inside (-pi/2, pi/2)");
  }
  const double max_abs = std::max(std::abs(pitch_lo), std::abs(pitch_hi));
  const double min_abs =
      (pitch_lo <= 0.0 && pitch_hi >= 0.0) ? 0.0 : std::min(std::abs(pitch_lo), std::abs(pitch_hi));
  const double r = std::cos(max_abs) / std::cos(min_abs);
  if (1.0 - r < 1e-12) return kPi / 2.0;
  return std::min(kPi / 2.0, std::atan(2.0 * std::sqrt(r) / (1.0 - r)));
}

/// Worst-case roll error bound over all true/reading pitch pairs within the
/// limits. The grid search over Sylvester tests is authoritative; the closed
/// form is reported alongside as a cross-check.
inline TauResult derive_tau(double pitch_lo, double pitch_hi, double grid_resolution) {
  if (!(grid_resolution > 0.0)) {
    throw std::invalid_argument("grid resolution must be positive");
  }
  TauResult out;
  out.grid_resolution = grid_resolution;
  out.tau_closed_form = closed_form_tau(pitch_lo, pitch_hi);

  const int cells = std::max(1, static_cast<int>(std::ceil((pitch_hi - pitch_lo) / grid_resolution)));
  std::vector<double> grid(cells + 1);
  for (int i = 0; i <= cells; ++i) {
    grid[i] = pitch_lo + (pitch_hi - pitch_lo) * i / cells;
  }

  double best = kPi / 2.0;
  double bq2 = grid[0], bqt2 = grid[0];
  for (double q2 : grid) {
    for (double qt2 : grid) {
      const double bound = pd_breakdown_e4(q2, qt2);
      if (bound < best) {
        best = bound;
        bq2 = q2;
        bqt2 = qt2;
      }
    }
  }
  out.tau = best;
  out.q2_binding = bq2;
  out.qt2_binding = bqt2;
  return out;
}

inline TauResult derive_tau(const ChainModel& chain, double grid_resolution) {
  return derive_tau(chain.lower(1), chain.upper(1), grid_resolution);
}

struct LyapunovStepInput {
  Eigen::Vector4d v;
  double q2, q3, qt2, qt3, e4;
};

struct LyapunovSample {
  double V = 0.0;
  double Vdot = 0.0;  // backward difference; zero at the first step
  bool pd = false;
};

/// Per-step Lyapunov value, backward-difference rate, and instantaneous
/// certificate flag for a recorded rollout.
inline std::vector<LyapunovSample> lyapunov_trace(
    const std::vector<LyapunovStepInput>& steps, double dt = 1.0) {
  std::vector<LyapunovSample> out;
  out.reserve(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    LyapunovSample s;
    s.V = lyapunov_value(steps[i].v);
    s.Vdot = i == 0 ? 0.0 : (s.V - out[i - 1].V) / dt;
    s.pd = sylvester_pd(hessian_H(steps[i].q2, steps[i].q3, steps[i].qt2,
                                  steps[i].qt3, steps[i].e4))
               .positive_definite;
    out.push_back(s);
  }
  return out;
}

}  // namespace rcmstab
