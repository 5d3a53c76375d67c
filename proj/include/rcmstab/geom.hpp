#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace rcmstab {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix64 = Eigen::Matrix<double, 6, 4>;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a > kPi) a -= 2.0 * kPi;
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

/// Thrown when composing transforms whose frame labels do not chain.
class FrameMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Axis { X, Y, Z };

inline Eigen::Vector3d axis_vector(Axis axis) {
  switch (axis) {
    case Axis::X:
      return Eigen::Vector3d::UnitX();
    case Axis::Y:
      return Eigen::Vector3d::UnitY();
    default:
      return Eigen::Vector3d::UnitZ();
  }
}

inline Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  // clang-format off
  m <<     0.0, -w.z(),  w.y(),
         w.z(),    0.0, -w.x(),
        -w.y(),  w.x(),    0.0;
  // clang-format on
  return m;
}

/// 3x3 orthonormal rotation, det +1.
class Rotation {
 public:
  Rotation() : m_(Eigen::Matrix3d::Identity()) {}
  explicit Rotation(Eigen::Matrix3d m) : m_(std::move(m)) {}

  static Rotation identity() { return Rotation(); }

  const Eigen::Matrix3d& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

  Rotation transposed() const { return Rotation(m_.transpose()); }
  Rotation operator*(const Rotation& rhs) const { return Rotation(m_ * rhs.m_); }
  Eigen::Vector3d operator*(const Eigen::Vector3d& v) const { return m_ * v; }

  bool is_orthonormal(double tol = 1e-10) const {
    return (m_.transpose() * m_ - Eigen::Matrix3d::Identity())
                   .cwiseAbs()
                   .maxCoeff() < tol &&
           std::abs(m_.determinant() - 1.0) < tol;
  }

  /// Geodesic angle to another rotation, in [0, pi].
  double angle_to(const Rotation& other) const {
    const double c = ((m_.transpose() * other.m_).trace() - 1.0) / 2.0;
    return std::acos(std::clamp(c, -1.0, 1.0));
  }

 private:
  Eigen::Matrix3d m_;
};

/// Elementary rotation about one coordinate axis.
inline Rotation rot_axis(Axis axis, double angle) {
  return Rotation(Eigen::AngleAxisd(angle, axis_vector(axis)).toRotationMatrix());
}

/// Rodrigues exponential, axis-angle vector to rotation.
inline Rotation exp_so3(const Eigen::Vector3d& w) {
  const double t2 = w.squaredNorm();
  double a, b;  // sin(t)/t and (1-cos(t))/t^2
  if (t2 < 1e-12) {
    a = 1.0 - t2 / 6.0;
    b = 0.5 - t2 / 24.0;
  } else {
    const double t = std::sqrt(t2);
    a = std::sin(t) / t;
    b = (1.0 - std::cos(t)) / t2;
  }
  const Eigen::Matrix3d k = skew(w);
  return Rotation(Eigen::Matrix3d::Identity() + a * k + b * k * k);
}

/// Axis-angle logarithm with |w| in [0, pi]. Near pi the skew part of R loses
/// the axis, so it is recovered from the dominant diagonal of (R+I)/2 instead
/// of dividing by sin(theta).
inline Eigen::Vector3d log_so3(const Rotation& r) {
  const Eigen::Matrix3d& m = r.matrix();
  const double c = std::clamp((m.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double theta = std::acos(c);
  const Eigen::Vector3d v(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));

  if (theta < 1e-6) {
    return (0.5 + theta * theta / 12.0) * v;
  }
  if (theta > kPi - 1e-4) {
    // w w^T = ((R + R^T)/2 - cos(theta) I) / (1 - cos(theta))
    const Eigen::Matrix3d outer =
        ((m + m.transpose()) * 0.5 - c * Eigen::Matrix3d::Identity()) / (1.0 - c);
    int k = 0;
    (m.diagonal() + Eigen::Vector3d::Ones()).maxCoeff(&k);
    Eigen::Vector3d axis = outer.col(k) / std::sqrt(outer(k, k));
    axis.normalize();
    if (v.squaredNorm() > 1e-24) {
      if (axis.dot(v) < 0.0) axis = -axis;
    } else {
      int j = 0;
      axis.cwiseAbs().maxCoeff(&j);
      if (axis(j) < 0.0) axis = -axis;
    }
    return theta * axis;
  }
  return (theta / (2.0 * std::sin(theta))) * v;
}

/// Rigid pose of frame `source` expressed in frame `target`; maps source-frame
/// points into the target frame. Empty labels are unconstrained.
class Transform {
 public:
  Transform() = default;
  Transform(Rotation r, Eigen::Vector3d t, std::string target = "",
            std::string source = "")
      : r_(std::move(r)),
        t_(std::move(t)),
        target_(std::move(target)),
        source_(std::move(source)) {}

  static Transform identity(const std::string& frame = "") {
    return Transform(Rotation::identity(), Eigen::Vector3d::Zero(), frame, frame);
  }
  static Transform translation(const Eigen::Vector3d& t) {
    return Transform(Rotation::identity(), t);
  }

  const Rotation& rotation() const { return r_; }
  const Eigen::Vector3d& translation() const { return t_; }
  const std::string& target_frame() const { return target_; }
  const std::string& source_frame() const { return source_; }

  Transform relabeled(std::string target, std::string source) const {
    return Transform(r_, t_, std::move(target), std::move(source));
  }

  /// Map a source-frame point into the target frame.
  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return r_ * p + t_; }

  Transform operator*(const Transform& rhs) const;

 private:
  Rotation r_;
  Eigen::Vector3d t_ = Eigen::Vector3d::Zero();
  std::string target_, source_;
};

inline Transform compose(const Transform& a, const Transform& b) {
  if (a.source_frame() != b.target_frame()) {
    throw FrameMismatch("cannot compose: '" + a.target_frame() + "<-" +
                        a.source_frame() + "' with '" + b.target_frame() + "<-" +
                        b.source_frame() + "'");
  }
  return Transform(a.rotation() * b.rotation(),
                   a.rotation() * b.translation() + a.translation(),
                   a.target_frame(), b.source_frame());
}

inline Transform Transform::operator*(const Transform& rhs) const {
  return compose(*this, rhs);
}

inline Transform invert(const Transform& t) {
  const Rotation rt = t.rotation().transposed();
  return Transform(rt, -(rt * t.translation()), t.source_frame(), t.target_frame());
}

/// Twist map from source-frame coordinates to target-frame coordinates,
/// rows ordered (linear, angular): [[R, [p]x R], [0, R]].
inline Matrix6d adjoint(const Transform& t) {
  Matrix6d ad = Matrix6d::Zero();
  const Eigen::Matrix3d& r = t.rotation().matrix();
  ad.topLeftCorner<3, 3>() = r;
  ad.topRightCorner<3, 3>() = skew(t.translation()) * r;
  ad.bottomRightCorner<3, 3>() = r;
  return ad;
}

/// Linear translation blend with geodesic rotation blend; s=0 gives a, s=1 gives b.
inline Transform interpolate_pose(const Transform& a, const Transform& b, double s) {
  if (a.target_frame() != b.target_frame() || a.source_frame() != b.source_frame()) {
    throw FrameMismatch("interpolate_pose: frame labels differ");
  }
  const Eigen::Vector3d w = log_so3(a.rotation().transposed() * b.rotation());
  return Transform(a.rotation() * exp_so3(s * w),
                   (1.0 - s) * a.translation() + s * b.translation(),
                   a.target_frame(), a.source_frame());
}

/// 6D velocity, (linear, angular), tagged with the frame it is expressed in.
struct Twist {
  Eigen::Vector3d linear = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular = Eigen::Vector3d::Zero();
  std::string frame;

  Vector6d vector() const {
    Vector6d v;
    v << linear, angular;
    return v;
  }
  static Twist from_vector(const Vector6d& v, std::string frame = "") {
    return Twist{v.head<3>(), v.tail<3>(), std::move(frame)};
  }
};

inline double translation_distance(const Transform& a, const Transform& b) {
  return (a.translation() - b.translation()).norm();
}

inline double rotation_distance(const Transform& a, const Transform& b) {
  return a.rotation().angle_to(b.rotation());
}

}  // namespace rcmstab
