#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcmstab/bench.hpp"

namespace rcmstab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace cfg_detail {

using nlohmann::json;

inline Axis parse_axis(const std::string& s) {
  if (s == "x") return Axis::X;
  if (s == "y") return Axis::Y;
  if (s == "z") return Axis::Z;
  throw ConfigError("axis must be one of x, y, z");
}

inline Eigen::Vector3d vec3(const json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) throw ConfigError(std::string(key) + " must be a 3-array");
  return Eigen::Vector3d(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

/// Pose as {"xyz": meters, "rpy_deg": roll/pitch/yaw} with R = Rz Ry Rx.
inline Transform parse_pose(const json& j) {
  Eigen::Vector3d xyz = Eigen::Vector3d::Zero();
  Eigen::Vector3d rpy = Eigen::Vector3d::Zero();
  if (j.contains("xyz")) xyz = vec3(j, "xyz");
  if (j.contains("rpy_deg")) rpy = vec3(j, "rpy_deg");
  const Rotation r = rot_axis(Axis::Z, deg2rad(rpy(2))) *
                     rot_axis(Axis::Y, deg2rad(rpy(1))) *
                     rot_axis(Axis::X, deg2rad(rpy(0)));
  return Transform(r, xyz);
}

}  // namespace cfg_detail

/// Everything a run needs; every section of the file is optional and defaults
/// to the dVRK-like setup. File units are degrees and meters (joint 3 and all
/// translations in meters), converted to radians on load.
struct AppConfig {
  std::vector<InviewJoint> inview = ChainModel::dvrk(true).inview;
  Eigen::VectorXd limits_lo, limits_hi;  // full-chain sizing; degrees except index 2
  double insertion_guard = 0.005;
  Transform camera_extrinsic = SimSetup::default_camera_extrinsic();
  Transform calib_error = Transform::identity().relabeled(kBaseMinus, "b");
  EpisodeConfig episode;
  SweepConfig sweep;
  Eigen::Vector4d rollout_bias = Eigen::Vector4d::Zero();  // deg, deg, m, deg

  AppConfig() {
    const ChainModel full = ChainModel::dvrk(true);
    limits_lo = full.lower;
    limits_hi = full.upper;
  }

  /// Chain and frames for one mode; limits are truncated for the 4-joint chain.
  SimSetup make_setup(ChainMode mode) const {
    SimSetup s;
    s.chain.inview = mode == ChainMode::Full ? inview : std::vector<InviewJoint>{};
    const int n = s.chain.joint_count();
    if (limits_lo.size() < n || limits_hi.size() < n) {
      throw ConfigError("joint limits do not cover the chain");
    }
    s.chain.lower = limits_lo.head(n);
    s.chain.upper = limits_hi.head(n);
    s.chain.insertion_guard = insertion_guard;
    s.chain.validate();
    s.camera_extrinsic = camera_extrinsic.relabeled(kCameraFrame, kBaseMinus);
    s.calib_error = calib_error.relabeled(kBaseMinus, s.chain.base_frame);
    return s;
  }

  ErrorState make_error(ChainMode mode) const {
    ErrorState e;
    e.bias = Eigen::Vector4d(deg2rad(rollout_bias(0)), deg2rad(rollout_bias(1)),
                             rollout_bias(2), deg2rad(rollout_bias(3)));
    e.calib_error = calib_error.relabeled(kBaseMinus, make_setup(mode).chain.base_frame);
    return e;
  }
};

inline AppConfig parse_config(const nlohmann::json& j) {
  using cfg_detail::parse_axis;
  using cfg_detail::parse_pose;
  AppConfig c;
  try {
    if (j.contains("chain")) {
      const auto& jc = j.at("chain");
      if (jc.contains("inview")) {
        c.inview.clear();
        for (const auto& jj : jc.at("inview")) {
          InviewJoint joint;
          joint.axis = parse_axis(jj.at("axis").get<std::string>());
          joint.pre = parse_pose(jj);
          c.inview.push_back(joint);
        }
      }
      if (jc.contains("camera_extrinsic")) c.camera_extrinsic = parse_pose(jc.at("camera_extrinsic"));
      if (jc.contains("calib_error")) c.calib_error = parse_pose(jc.at("calib_error"));
      if (jc.contains("insertion_guard_m")) c.insertion_guard = jc.at("insertion_guard_m").get<double>();
    }
    if (j.contains("limits")) {
      const auto& jl = j.at("limits");
      const auto lo = jl.at("lo").get<std::vector<double>>();
      const auto hi = jl.at("hi").get<std::vector<double>>();
      if (lo.size() != hi.size() || lo.size() < 4) {
        throw ConfigError("limits lo/hi must have equal size covering >= 4 joints");
      }
      c.limits_lo.resize(lo.size());
      c.limits_hi.resize(hi.size());
      for (std::size_t i = 0; i < lo.size(); ++i) {
        c.limits_lo(i) = i == 2 ? lo[i] : deg2rad(lo[i]);
        c.limits_hi(i) = i == 2 ? hi[i] : deg2rad(hi[i]);
      }
    }
    if (j.contains("episode")) {
      const auto& je = j.at("episode");
      if (je.contains("alpha")) c.episode.alpha = je.at("alpha").get<double>();
      if (je.contains("total_iters")) c.episode.total_iters = je.at("total_iters").get<int>();
      if (je.contains("trajectory_iters")) c.episode.trajectory_iters = je.at("trajectory_iters").get<int>();
      if (je.contains("converge_pos_mm")) c.episode.converge_pos = je.at("converge_pos_mm").get<double>() * 1e-3;
      if (je.contains("converge_ori_deg")) c.episode.converge_ori = deg2rad(je.at("converge_ori_deg").get<double>());
      if (je.contains("step_size")) c.episode.step_size = je.at("step_size").get<double>();
      if (je.contains("seed")) c.episode.seed = je.at("seed").get<std::uint64_t>();
    }
    if (j.contains("sweep")) {
      const auto& js = j.at("sweep");
      if (js.contains("level_pcts")) c.sweep.level_pcts = js.at("level_pcts").get<std::vector<double>>();
      if (js.contains("trajectories")) c.sweep.trajectories = js.at("trajectories").get<int>();
      if (js.contains("chain_mode")) c.sweep.chain_mode = parse_chain_mode(js.at("chain_mode").get<std::string>());
      if (js.contains("controllers")) {
        c.sweep.controllers.clear();
        for (const auto& s : js.at("controllers").get<std::vector<std::string>>()) {
          c.sweep.controllers.push_back(parse_controller(s));
        }
      }
      if (js.contains("e_max")) {
        const auto em = js.at("e_max").get<std::vector<double>>();
        if (em.size() != 4) throw ConfigError("e_max must have 4 entries (deg, deg, m, deg)");
        c.sweep.e_max = Eigen::Vector4d(deg2rad(em[0]), deg2rad(em[1]), em[2], deg2rad(em[3]));
      }
    }
    if (j.contains("error")) {
      const auto& je = j.at("error");
      if (je.contains("bias")) {
        const auto b = je.at("bias").get<std::vector<double>>();
        if (b.size() != 4) throw ConfigError("error.bias must have 4 entries (deg, deg, m, deg)");
        c.rollout_bias = Eigen::Vector4d(b[0], b[1], b[2], b[3]);
      }
      if (je.contains("calib_error")) c.calib_error = parse_pose(je.at("calib_error"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return c;
}

inline AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

/// ErrorState with file units (degrees for the revolute biases).
inline nlohmann::json error_state_to_json(const ErrorState& e) {
  nlohmann::json j;
  j["bias"] = {rad2deg(e.bias(0)), rad2deg(e.bias(1)), e.bias(2), rad2deg(e.bias(3))};
  const Eigen::Vector3d t = e.calib_error.translation();
  const Eigen::Vector3d rpy =
      e.calib_error.rotation().matrix().eulerAngles(2, 1, 0).reverse();
  j["calib_error"] = {{"xyz", {t(0), t(1), t(2)}},
                      {"rpy_deg", {rad2deg(rpy(0)), rad2deg(rpy(1)), rad2deg(rpy(2))}}};
  return j;
}

inline ErrorState error_state_from_json(const nlohmann::json& j, const std::string& base_frame = "b") {
  ErrorState e;
  try {
    if (j.contains("bias")) {
      const auto b = j.at("bias").get<std::vector<double>>();
      if (b.size() != 4) throw ConfigError("bias must have 4 entries (deg, deg, m, deg)");
      e.bias = Eigen::Vector4d(deg2rad(b[0]), deg2rad(b[1]), b[2], deg2rad(b[3]));
    }
    if (j.contains("calib_error")) {
      e.calib_error = cfg_detail::parse_pose(j.at("calib_error")).relabeled(kBaseMinus, base_frame);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed error state: ") + ex.what());
  }
  return e;
}

}  // namespace rcmstab
