#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "rcmstab/geom.hpp"

namespace rcmstab {

class SingularInsertion : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class JointLimitViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The proximal chain the endoscope cannot see: outer yaw, outer pitch,
/// insertion, roll. Joint 3 (index 2) is prismatic, in meters.
inline constexpr int kOutOfViewJoints = 4;

/// One distal joint: a fixed link offset followed by a revolute joint.
struct InviewJoint {
  Transform pre;
  Axis axis = Axis::Z;
};

struct ChainModel {
  std::vector<InviewJoint> inview;
  Eigen::VectorXd lower, upper;  // per-joint limits, rad except index 2 (m)
  double insertion_guard = 0.005;
  std::string base_frame = "b";
  std::string nb_frame = "nb";
  std::string tip_frame = "tool";

  int joint_count() const { return kOutOfViewJoints + static_cast<int>(inview.size()); }
  int inview_count() const { return static_cast<int>(inview.size()); }

  bool admissible(const Eigen::VectorXd& q) const {
    if (q.size() != joint_count()) return false;
    for (int i = 0; i < q.size(); ++i) {
      if (!(q(i) >= lower(i) && q(i) <= upper(i))) return false;
    }
    return true;
  }

  void require_admissible(const Eigen::VectorXd& q) const {
    if (!admissible(q)) {
      throw JointLimitViolation("joint vector violates limits");
    }
  }

  Eigen::VectorXd clamp(const Eigen::VectorXd& q) const {
    return q.cwiseMax(lower).cwiseMin(upper);
  }

  void validate() const {
    const int n = joint_count();
    if (lower.size() != n || upper.size() != n) {
      throw std::invalid_argument("joint limits must cover all joints");
    }
    for (int i = 0; i < n; ++i) {
      if (!(lower(i) < upper(i))) {
        throw std::invalid_argument("joint limit lower bound must be below upper");
      }
    }
    if (!(lower(2) > insertion_guard)) {
      throw std::invalid_argument("insertion lower limit must exceed the singularity guard");
    }
  }

  /// dVRK-like defaults. The wrist variant appends a pitch joint about the
  /// link-nb x axis and, 9.1 mm further along the post-pitch x axis, a yaw
  /// joint about y. Geometry and limits are configuration, not calibration.
  static ChainModel dvrk(bool with_wrist = true) {
    ChainModel c;
    if (with_wrist) {
      c.inview.push_back({Transform::identity(), Axis::X});
      c.inview.push_back({Transform::translation({0.0091, 0.0, 0.0}), Axis::Y});
    }
    const int n = c.joint_count();
    c.lower.resize(n);
    c.upper.resize(n);
    c.lower.head<4>() << deg2rad(-90.0), deg2rad(-53.0), 0.0565, deg2rad(-90.0);
    c.upper.head<4>() << deg2rad(90.0), deg2rad(53.0), 0.2400, deg2rad(90.0);
    for (int i = kOutOfViewJoints; i < n; ++i) {
      c.lower(i) = deg2rad(-80.0);
      c.upper(i) = deg2rad(80.0);
    }
    return c;
  }
};

namespace detail {

/// FK composition without the singularity guard. Reading-based chains may
/// carry insertion values near or below zero and still have a well-defined
/// pose; only operations that invert W or D are singular there.
inline Transform fk_oov_any(const ChainModel& chain, const Eigen::Vector4d& q) {
  const Rotation r01 = rot_axis(Axis::X, q(0)) * rot_axis(Axis::Y, q(1));
  return Transform(r01 * rot_axis(Axis::Z, q(3)),
                   r01 * Eigen::Vector3d(0.0, 0.0, q(2)), chain.base_frame,
                   chain.nb_frame);
}

}  // namespace detail

/// Pose of link nb in the base frame: Rx(q1) Ry(q2) Tz(q3) Rz(q4). The RCM
/// pivot is the base origin, so the translation norm always equals |q3|.
inline Transform fk_oov(const ChainModel& chain, const Eigen::Vector4d& q) {
  if (std::abs(q(2)) <= chain.insertion_guard) {
    throw SingularInsertion("insertion depth inside the singularity guard");
  }
  return detail::fk_oov_any(chain, q);
}

/// Body-frame Jacobian of the out-of-view chain, rows (linear xyz, angular xyz)
/// in the link-nb frame.
inline Matrix64 body_jacobian_oov(const Eigen::Vector4d& q) {
  const double c2 = std::cos(q(1)), s2 = std::sin(q(1));
  const double c4 = std::cos(q(3)), s4 = std::sin(q(3));
  const double q3 = q(2);
  Matrix64 j;
  // clang-format off
  j << -q3 * c2 * s4,  q3 * c4, 0, 0,
       -q3 * c2 * c4, -q3 * s4, 0, 0,
                 0.0,      0.0, 1, 0,
             c2 * c4,       s4, 0, 0,
            -c2 * s4,       c4, 0, 0,
                  s2,      0.0, 0, 1;
  // clang-format on
  return j;
}

/// Deprojection of the 4D linear+roll space into 6D twist space. Singular in
/// a neighborhood of zero insertion; negative (reading-space) values are valid.
inline Matrix64 d_factor(double q3, double guard = 0.005) {
  if (std::abs(q3) <= guard) {
    throw SingularInsertion("insertion depth inside the singularity guard");
  }
  Matrix64 d = Matrix64::Zero();
  d(0, 0) = 1.0;
  d(1, 1) = 1.0;
  d(2, 2) = 1.0;
  d(3, 1) = -1.0 / q3;
  d(4, 0) = 1.0 / q3;
  d(5, 3) = 1.0;
  return d;
}

inline Eigen::Matrix4d q_factor(double q4) {
  const double c4 = std::cos(q4), s4 = std::sin(q4);
  Eigen::Matrix4d q = Eigen::Matrix4d::Identity();
  q(0, 0) = -s4;
  q(0, 1) = c4;
  q(1, 0) = -c4;
  q(1, 1) = -s4;
  return q;
}

inline Eigen::Matrix4d w_factor(double q2, double q3) {
  Eigen::Matrix4d w = Eigen::Matrix4d::Identity();
  w(0, 0) = q3 * std::cos(q2);
  w(1, 1) = q3;
  return w;
}

inline Eigen::Matrix4d s_factor(double q2) {
  Eigen::Matrix4d s = Eigen::Matrix4d::Identity();
  s(3, 0) = std::sin(q2);
  return s;
}

struct JacobianFactors {
  Matrix64 D;
  Eigen::Matrix4d Q, W, S;
};

/// Factorization of the out-of-view body Jacobian, J = D Q W S.
inline JacobianFactors dqws_factors(double q2, double q3, double q4,
                                    double guard = 0.005) {
  return {d_factor(q3, guard), q_factor(q4), w_factor(q2, q3), s_factor(q2)};
}

/// Pose of the tip in the link-nb frame; identity (relabeling) when the
/// in-view segment is empty.
inline Transform fk_inview(const ChainModel& chain, const Eigen::VectorXd& q_in) {
  if (q_in.size() != chain.inview_count()) {
    throw std::invalid_argument("in-view joint vector size mismatch");
  }
  Transform t = Transform::identity();
  for (int i = 0; i < chain.inview_count(); ++i) {
    const InviewJoint& joint = chain.inview[i];
    t = t * joint.pre *
        Transform(rot_axis(joint.axis, q_in(i)), Eigen::Vector3d::Zero());
  }
  return t.relabeled(chain.nb_frame, chain.tip_frame);
}

inline Transform fk_full(const ChainModel& chain, const Eigen::VectorXd& q) {
  if (q.size() != chain.joint_count()) {
    throw std::invalid_argument("joint vector size mismatch");
  }
  return fk_oov(chain, q.head<4>()) * fk_inview(chain, q.tail(chain.inview_count()));
}

namespace detail {

inline Transform fk_full_any(const ChainModel& chain, const Eigen::VectorXd& q) {
  if (q.size() != chain.joint_count()) {
    throw std::invalid_argument("joint vector size mismatch");
  }
  return fk_oov_any(chain, q.head<4>()) *
         fk_inview(chain, q.tail(chain.inview_count()));
}

}  // namespace detail

/// Body-frame Jacobian of the in-view segment w.r.t. its own joints, expressed
/// at the tip. 6x0 when the segment is empty.
inline Eigen::MatrixXd body_jacobian_inview(const ChainModel& chain,
                                            const Eigen::VectorXd& q_in) {
  const int k = chain.inview_count();
  if (q_in.size() != k) {
    throw std::invalid_argument("in-view joint vector size mismatch");
  }
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(6, k);
  // suffix = product of the links after joint i; twist of joint i maps through
  // Ad(suffix^-1) into the tip frame.
  Transform suffix = Transform::identity();
  for (int i = k - 1; i >= 0; --i) {
    Vector6d xi = Vector6d::Zero();
    xi.tail<3>() = axis_vector(chain.inview[i].axis);
    j.col(i) = adjoint(invert(suffix)) * xi;
    suffix = chain.inview[i].pre *
             Transform(rot_axis(chain.inview[i].axis, q_in(i)), Eigen::Vector3d::Zero()) *
             suffix;
  }
  return j;
}

/// Body-frame Jacobian of the whole chain at the tip: out-of-view columns are
/// mapped through the in-view segment, in-view columns are exact.
inline Eigen::MatrixXd body_jacobian_full(const ChainModel& chain,
                                          const Eigen::VectorXd& q) {
  const int k = chain.inview_count();
  Eigen::MatrixXd j(6, chain.joint_count());
  const Transform t_in = fk_inview(chain, q.tail(k));
  j.leftCols<4>() = adjoint(invert(t_in)) * body_jacobian_oov(q.head<4>());
  j.rightCols(k) = body_jacobian_inview(chain, q.tail(k));
  return j;
}

}  // namespace rcmstab
