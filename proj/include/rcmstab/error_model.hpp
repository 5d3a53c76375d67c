#pragma once

#include <string>
#include <utility>

#include "rcmstab/chain.hpp"

namespace rcmstab {

inline constexpr const char* kCameraFrame = "cam";
inline constexpr const char* kBaseMinus = "b-";  // calibrated (erroneous) base
inline constexpr const char* kBasePlus = "b+";   // base implied by the lumped correction

/// Constant-per-rollout reading errors. True joints relate to readings by
/// q = readings + bias on the out-of-view joints; in-view reading errors are
/// directly observable and are held at zero in simulation.
struct ErrorState {
  Eigen::Vector4d bias = Eigen::Vector4d::Zero();  // rad, rad, m, rad
  Transform calib_error = Transform::identity().relabeled(kBaseMinus, "b");
  Eigen::VectorXd inview_errors;

  Eigen::VectorXd inview_errors_or_zero(int k) const {
    if (inview_errors.size() == k) return inview_errors;
    return Eigen::VectorXd::Zero(k);
  }
};

/// True end-effector pose in the camera frame. `cam_from_base` is the exact
/// camera-from-base transform, i.e. camera_extrinsic * calib_error.
inline Transform true_pose(const ChainModel& chain, const Eigen::VectorXd& q_true,
                           const Transform& cam_from_base) {
  return cam_from_base * fk_full(chain, q_true);
}

struct BiasedReadings {
  Eigen::VectorXd values;
  bool within_limits = true;
};

/// Sensor readings for a true configuration: out-of-view joints read low by
/// the bias, in-view joints are visually corrected to truth.
inline BiasedReadings apply_bias(const ChainModel& chain,
                                 const Eigen::VectorXd& q_true,
                                 const ErrorState& err) {
  BiasedReadings out;
  out.values = q_true;
  out.values.head<4>() -= err.bias;
  out.values.tail(chain.inview_count()) -=
      err.inview_errors_or_zero(chain.inview_count());
  out.within_limits = chain.admissible(out.values);
  return out;
}

/// The correction transform that makes the reading-based chain reproduce the
/// observed end-effector pose: (T^c_b-)^-1 * observed * FK(readings)^-1.
/// It absorbs both the calibration error and the out-of-view biases, and it
/// changes with the readings even when those errors are constant.
inline Transform lumped_correction(const Transform& observed,
                                   const Eigen::VectorXd& readings,
                                   const Transform& camera_extrinsic,
                                   const ChainModel& chain) {
  const Transform reading_chain =
      detail::fk_full_any(chain, readings).relabeled(kBasePlus, chain.tip_frame);
  return invert(camera_extrinsic) * observed * invert(reading_chain);
}

/// Everything the tracking loop knows at one instant.
struct TrackedState {
  Eigen::VectorXd readings;
  Transform lumped;            // b- <- b+
  Transform camera_extrinsic;  // cam <- b-
  bool readings_within_limits = true;
};

/// Simulate one perfect-tracking measurement: bias the readings, observe the
/// true pose, and fit the lumped correction.
inline TrackedState track(const ChainModel& chain, const Eigen::VectorXd& q_true,
                          const ErrorState& err, const Transform& camera_extrinsic) {
  TrackedState t;
  BiasedReadings r = apply_bias(chain, q_true, err);
  t.readings = std::move(r.values);
  t.readings_within_limits = r.within_limits;
  t.camera_extrinsic = camera_extrinsic;
  const Transform observed =
      true_pose(chain, q_true, camera_extrinsic * err.calib_error);
  t.lumped = lumped_correction(observed, t.readings, camera_extrinsic, chain);
  return t;
}

/// Tip pose according to the tracked, reading-based chain. Equal to the true
/// pose by construction of the lumped correction.
inline Transform tracked_tip_pose(const ChainModel& chain, const TrackedState& t) {
  return t.camera_extrinsic * t.lumped *
         detail::fk_full_any(chain, t.readings).relabeled(kBasePlus, chain.tip_frame);
}

/// Link-nb pose according to the tracked chain. Unlike the tip this is not
/// the true link-nb pose when the bias is nonzero.
inline Transform tracked_nb_pose(const ChainModel& chain, const TrackedState& t) {
  return t.camera_extrinsic * t.lumped *
         detail::fk_oov_any(chain, t.readings.head<4>())
             .relabeled(kBasePlus, chain.nb_frame);
}

}  // namespace rcmstab
