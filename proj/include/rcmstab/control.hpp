#pragma once

#include <stdexcept>
#include <utility>

#include "rcmstab/error_model.hpp"
#include "rcmstab/pinv.hpp"

namespace rcmstab {

/// Per-step joint velocity magnitudes are capped at this multiple of the gain
/// so intentionally unstable regimes stay bounded and measurable.
inline constexpr double kCommandClampFactor = 10.0;

template <typename Derived>
inline auto clamp_command(const Eigen::MatrixBase<Derived>& qdot, double alpha) {
  const double lim = kCommandClampFactor * alpha;
  return qdot.cwiseMin(lim).cwiseMax(-lim).eval();
}

struct ControlCommand {
  Eigen::VectorXd qdot;
  Eigen::Vector4d v_oov = Eigen::Vector4d::Zero();  // linear+roll objective given to joints 1..4
  Vector6d v_inview = Vector6d::Zero();             // twist objective given to the in-view joints
  double residual = 0.0;                            // unrealizable part of the split
  bool ik_converged = true;
  int ik_iters = 0;
};

/// Linear+roll tracking error of the out-of-view chain. `goal` and `current`
/// are camera-frame poses; `r_nb_to_cam` rotates link-nb coordinates into the
/// camera frame and may come from the tracked (reading-based) chain.
inline Eigen::Vector4d objective_oov(const Transform& goal, const Transform& current,
                                     const Rotation& r_nb_to_cam) {
  if (goal.target_frame() != current.target_frame()) {
    throw FrameMismatch("objective_oov: goal and current are in different frames");
  }
  const Eigen::Matrix3d rt = r_nb_to_cam.matrix().transpose();
  const Eigen::Vector3d dp = rt * (current.translation() - goal.translation());
  const Eigen::Vector3d dw =
      rt * log_so3(current.rotation() * goal.rotation().transposed());
  return Eigen::Vector4d(dp.x(), dp.y(), dp.z(), dw.z());
}

/// Resolved-rate law for the out-of-view joints. Q and W are built from the
/// erroneous readings; S is dropped (its roll coupling is small and joint 4
/// absorbs it).
inline Eigen::Vector4d rr_oov_step(const Eigen::Vector4d& v, double qt2, double qt3,
                                   double qt4, double alpha, double guard = 0.005) {
  if (!(alpha > 0.0)) throw std::invalid_argument("gain must be positive");
  if (std::abs(qt3) <= guard) {
    throw SingularInsertion("insertion reading inside the singularity guard");
  }
  const Eigen::Matrix4d qw = q_factor(qt4) * w_factor(qt2, qt3);
  const Eigen::Vector4d qdot = -alpha * (pinv(qw) * v).eval();
  return clamp_command(qdot, alpha);
}

/// Full 6D tracking error rotated into the frame whose rotation is `r_tip_to_cam`.
inline Vector6d objective_full(const Transform& goal, const Transform& current,
                               const Rotation& r_tip_to_cam) {
  if (goal.target_frame() != current.target_frame()) {
    throw FrameMismatch("objective_full: goal and current are in different frames");
  }
  const Eigen::Matrix3d rt = r_tip_to_cam.matrix().transpose();
  Vector6d v;
  v.head<3>() = rt * (current.translation() - goal.translation());
  v.tail<3>() = rt * log_so3(current.rotation() * goal.rotation().transposed());
  return v;
}

struct BilevelSplit {
  Eigen::Vector4d v_oov;
  Vector6d v_inview;
  double residual;
};

/// Least-squares split of the full-chain objective between the out-of-view and
/// in-view controllers: minimize the part of (v_n - Ad D x) that the in-view
/// column space cannot absorb, then hand the remainder to the in-view chain.
/// The pseudoinverse cutoff is anchored to the unprojected Ad*D so directions
/// annihilated by the projector are dropped rather than amplified.
inline BilevelSplit bilevel_allocate(const Vector6d& v_n,
                                     const Eigen::MatrixXd& j_inview,
                                     const Matrix6d& ad_nb_to_tip,
                                     const Matrix64& d_readings) {
  const Eigen::MatrixXd proj =
      Eigen::MatrixXd::Identity(6, 6) - j_inview * pinv(j_inview);
  const Matrix64 ad_d = ad_nb_to_tip * d_readings;
  const double sigma_ref = max_singular_value(ad_d);
  const Eigen::Vector4d x =
      pinv(proj * ad_d, kPinvRelTol, sigma_ref) * (proj * v_n).eval();
  BilevelSplit split;
  split.v_oov = x;
  split.v_inview = v_n - ad_d * x;
  split.residual = (proj * split.v_inview).norm();
  return split;
}

/// Resolved-rate law for the in-view joints against their true body Jacobian.
inline Eigen::VectorXd rr_inview_step(const Vector6d& v, const Eigen::MatrixXd& j_inview,
                                      double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("gain must be positive");
  const Eigen::VectorXd qdot = -alpha * (pinv(j_inview) * v).eval();
  return clamp_command(qdot, alpha);
}

/// One resolved-rate control step from the tracked state. A chain without an
/// in-view segment uses the 4D linear+roll law directly; otherwise the bilevel
/// split coordinates the two sub-controllers.
inline ControlCommand rr_step(const ChainModel& chain, const Transform& goal_cam,
                              const TrackedState& tracked, double alpha) {
  ControlCommand cmd;
  const Eigen::VectorXd& qr = tracked.readings;
  if (chain.inview.empty()) {
    const Transform current = tracked_nb_pose(chain, tracked);
    cmd.v_oov = objective_oov(goal_cam, current, current.rotation());
    cmd.qdot = rr_oov_step(cmd.v_oov, qr(1), qr(2), qr(3), alpha, chain.insertion_guard);
    return cmd;
  }
  const Transform current = tracked_tip_pose(chain, tracked);
  const Vector6d v_n = objective_full(goal_cam, current, current.rotation());
  const Eigen::VectorXd q_in = qr.tail(chain.inview_count());
  const Eigen::MatrixXd j_in = body_jacobian_inview(chain, q_in);
  const Matrix6d ad = adjoint(invert(fk_inview(chain, q_in)));
  const BilevelSplit split =
      bilevel_allocate(v_n, j_in, ad, d_factor(qr(2), chain.insertion_guard));
  cmd.v_oov = split.v_oov;
  cmd.v_inview = split.v_inview;
  cmd.residual = split.residual;
  cmd.qdot.resize(chain.joint_count());
  cmd.qdot.head<4>() =
      rr_oov_step(split.v_oov, qr(1), qr(2), qr(3), alpha, chain.insertion_guard);
  cmd.qdot.tail(chain.inview_count()) = rr_inview_step(split.v_inview, j_in, alpha);
  return cmd;
}

struct IkOptions {
  double lambda = 1e-3;     // damping
  int max_iters = 100;
  double tol = 1e-6;        // meter-equivalent residual
  double ori_weight = 0.01; // meters per radian of orientation error
  double step_limit = 0.5;  // per-iteration joint step cap
  bool clamp_iterates = false;  // keep iterates inside the joint limits
};

struct IkResult {
  Eigen::VectorXd q;
  double residual = 0.0;
  int iters = 0;
  bool converged = false;
};

/// Damped-least-squares IK toward a base-frame goal. The solve runs in
/// reading space, which biased sensors can push outside the joint limits, so
/// iterates are unconstrained; feasibility of the executed motion is enforced
/// by the physical joint clamp downstream. Residual mixes position (m) with
/// down-weighted orientation.
inline IkResult solve_ik(const ChainModel& chain, const Transform& goal_base,
                         const Eigen::VectorXd& q0, const IkOptions& opts = {}) {
  IkResult out;
  Eigen::VectorXd q = opts.clamp_iterates ? chain.clamp(q0) : q0;
  for (out.iters = 0; out.iters <= opts.max_iters; ++out.iters) {
    const Transform t = detail::fk_full_any(chain, q);
    const Eigen::Matrix3d rt = t.rotation().matrix().transpose();
    Vector6d e;
    e.head<3>() = rt * (goal_base.translation() - t.translation());
    e.tail<3>() = opts.ori_weight * log_so3(t.rotation().transposed() * goal_base.rotation());
    out.residual = e.norm();
    if (out.residual < opts.tol || out.iters == opts.max_iters) break;
    Eigen::MatrixXd jw = body_jacobian_full(chain, q);
    jw.bottomRows<3>() *= opts.ori_weight;
    const Matrix6d jjt =
        jw * jw.transpose() + opts.lambda * opts.lambda * Matrix6d::Identity();
    Eigen::VectorXd dq = jw.transpose() * jjt.ldlt().solve(e);
    const double m = dq.cwiseAbs().maxCoeff();
    if (m > opts.step_limit) dq *= opts.step_limit / m;
    q += dq;
    if (opts.clamp_iterates) q = chain.clamp(q);
  }
  // Revolute joints are 2pi-periodic, so pull the solution onto the branch
  // nearest the start iterate; executing a wound-up branch would drag the
  // robot into its limits even though the pose solution is exact.
  for (int i = 0; i < q.size(); ++i) {
    if (i == 2) continue;  // insertion is prismatic
    q(i) = q0(i) + wrap_angle(q(i) - q0(i));
  }
  out.q = std::move(q);
  out.converged = out.residual < opts.tol;
  return out;
}

/// Re-solved IK controller: map the goal into the tracked base frame, solve IK
/// on the reading-based chain, and command velocities toward the solution.
/// The previous solution warm-starts the next solve. A warm-started solve can
/// track a solution branch out of the believed joint box, in which case a
/// handful of deterministic box-clamped restarts look for a feasible branch.
/// Underactuated chains with large biases routinely leave the goal off the
/// reachable set, which the nonconvergence flag reports.
class IkController {
 public:
  explicit IkController(IkOptions opts = {}) : opts_(opts) {}

  ControlCommand step(const ChainModel& chain, const Transform& goal_cam,
                      const TrackedState& tracked, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("gain must be positive");
    ControlCommand cmd;
    const Transform cam_from_bplus = tracked.camera_extrinsic * tracked.lumped;
    const Transform goal_base =
        (invert(cam_from_bplus) * goal_cam)
            .relabeled(chain.base_frame, goal_cam.source_frame());
    const Eigen::VectorXd q0 = warm_.size() ? warm_ : tracked.readings;
    IkResult sol = solve_ik(chain, goal_base, q0, opts_);

    const bool usable = sol.converged && inside_box(chain, sol.q);
    if (!usable) {
      if (cooldown_ == 0) {
        sol = multistart(chain, goal_base, tracked.readings, sol);
        if (!(sol.converged && inside_box(chain, sol.q))) cooldown_ = 9;
      } else {
        --cooldown_;
      }
    } else {
      cooldown_ = 0;
    }

    warm_ = sol.q;
    cmd.qdot = clamp_command(alpha * (sol.q - tracked.readings), alpha);
    cmd.ik_converged = sol.converged && inside_box(chain, sol.q);
    cmd.ik_iters = sol.iters;
    cmd.residual = sol.residual;
    return cmd;
  }

  void reset() {
    warm_.resize(0);
    cooldown_ = 0;
  }

 private:
  static bool inside_box(const ChainModel& chain, const Eigen::VectorXd& q) {
    const double slack = 1e-9;
    for (int i = 0; i < q.size(); ++i) {
      if (q(i) < chain.lower(i) - slack || q(i) > chain.upper(i) + slack) return false;
    }
    return true;
  }

  IkResult multistart(const ChainModel& chain, const Transform& goal_base,
                      const Eigen::VectorXd& readings, IkResult best) const {
    IkOptions clamped = opts_;
    clamped.clamp_iterates = true;
    std::vector<Eigen::VectorXd> starts;
    starts.push_back(readings);
    const Eigen::VectorXd mid = 0.5 * (chain.lower + chain.upper);
    starts.push_back(mid);
    for (const double side : {0.7, -0.7}) {
      Eigen::VectorXd s = mid;
      s(3) = mid(3) + side * 0.5 * (chain.upper(3) - chain.lower(3));
      if (chain.inview_count() >= 1) {
        s(4) = mid(4) - side * 0.5 * (chain.upper(4) - chain.lower(4));
      }
      starts.push_back(s);
    }
    for (const Eigen::VectorXd& start : starts) {
      const IkResult attempt = solve_ik(chain, goal_base, start, clamped);
      if (attempt.converged) return attempt;
      if (attempt.residual < best.residual && inside_box(chain, attempt.q)) {
        best = attempt;
      }
    }
    return best;
  }

  IkOptions opts_;
  Eigen::VectorXd warm_;
  int cooldown_ = 0;
};

/// Calibration-only comparison controller: full 6D resolved rate on the chain
/// reconstructed from a fixed initial calibration and the raw readings, with
/// no tracking correction.
inline ControlCommand baseline_step(const ChainModel& chain, const Transform& goal_cam,
                                    const Eigen::VectorXd& readings,
                                    const Transform& initial_calib, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("gain must be positive");
  ControlCommand cmd;
  const Transform believed = initial_calib * detail::fk_full_any(chain, readings);
  const Vector6d v = objective_full(goal_cam, believed, believed.rotation());
  const Eigen::MatrixXd j = body_jacobian_full(chain, readings);
  cmd.qdot = clamp_command((-alpha * (pinv(j) * v)).eval(), alpha);
  cmd.v_inview = v;
  return cmd;
}

}  // namespace rcmstab
