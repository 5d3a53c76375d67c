#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rcmstab/control.hpp"
#include "rcmstab/rng.hpp"
#include "rcmstab/stability.hpp"

namespace rcmstab {

enum class ControllerKind { Rr, Ik, Baseline };
enum class ChainMode { OutOfView, Full };

inline const char* to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::Rr: return "rr";
    case ControllerKind::Ik: return "ik";
    default: return "baseline";
  }
}

inline const char* to_string(ChainMode m) {
  return m == ChainMode::OutOfView ? "oov" : "full";
}

inline ControllerKind parse_controller(const std::string& s) {
  if (s == "rr") return ControllerKind::Rr;
  if (s == "ik") return ControllerKind::Ik;
  if (s == "baseline") return ControllerKind::Baseline;
  throw std::invalid_argument("unknown controller '" + s + "'");
}

inline ChainMode parse_chain_mode(const std::string& s) {
  if (s == "oov") return ChainMode::OutOfView;
  if (s == "full") return ChainMode::Full;
  throw std::invalid_argument("unknown chain mode '" + s + "'");
}

/// Frames and error sources shared by every rollout of a run.
struct SimSetup {
  ChainModel chain;
  Transform camera_extrinsic;  // cam <- b-
  Transform calib_error;       // b- <- b

  Transform cam_from_base() const { return camera_extrinsic * calib_error; }

  static Transform default_camera_extrinsic() {
    return Transform(rot_axis(Axis::Z, deg2rad(20.0)) * rot_axis(Axis::X, deg2rad(150.0)),
                     Eigen::Vector3d(0.10, -0.05, 0.40), kCameraFrame, kBaseMinus);
  }

  static SimSetup dvrk(ChainMode mode) {
    SimSetup s;
    s.chain = ChainModel::dvrk(mode == ChainMode::Full);
    s.camera_extrinsic = default_camera_extrinsic();
    s.calib_error = Transform::identity().relabeled(kBaseMinus, s.chain.base_frame);
    return s;
  }
};

struct EpisodeConfig {
  double alpha = 1.0 / 6.0;
  int total_iters = 600;
  int trajectory_iters = 60;
  double converge_pos = 1e-3;             // m
  double converge_ori = deg2rad(0.5);     // rad
  double step_size = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    if (!(trajectory_iters > 0 && trajectory_iters < total_iters)) {
      throw std::invalid_argument("trajectory stage must be shorter than the episode");
    }
    if (!(converge_pos > 0.0 && converge_ori > 0.0)) {
      throw std::invalid_argument("convergence thresholds must be positive");
    }
  }
};

struct SweepConfig {
  std::vector<double> level_pcts = {0.0, 33.0, 66.0, 83.3, 91.7, 100.0};
  int trajectories = 10;
  Eigen::Vector4d e_max{0.0, deg2rad(53.0), 0.1835, deg2rad(90.0)};
  ChainMode chain_mode = ChainMode::OutOfView;
  std::vector<ControllerKind> controllers = {ControllerKind::Rr, ControllerKind::Ik,
                                             ControllerKind::Baseline};

  void validate() const {
    if (e_max(0) != 0.0) {
      throw std::invalid_argument("outer yaw error is ignored; e_max[0] must be 0");
    }
    if (level_pcts.empty() || trajectories <= 0 || controllers.empty()) {
      throw std::invalid_argument("sweep needs levels, trajectories and controllers");
    }
  }
};

struct Episode {
  Transform start_pose, goal_pose;  // camera frame
  Eigen::VectorXd q_start;
};

/// Per-trajectory bias sign pattern. Pitch and roll signs are symmetric in
/// effect and drawn at random; the insertion sign is pinned so the biased
/// reading runs deep rather than through zero, where the reading-space chain
/// is singular and no controller can operate.
inline Eigen::Vector4d draw_bias_signs(Rng& rng) {
  Eigen::Vector4d signs;
  for (int j = 0; j < 4; ++j) signs(j) = rng.sign();
  signs(2) = -1.0;
  return signs;
}

/// Draw two admissible configurations and turn them into camera-frame start
/// and goal poses; reachability holds by construction.
inline Episode sample_episode(const SimSetup& setup, std::uint64_t seed) {
  Rng rng(seed);
  const ChainModel& chain = setup.chain;
  const int n = chain.joint_count();
  const auto draw = [&] {
    Eigen::VectorXd q(n);
    for (int i = 0; i < n; ++i) q(i) = rng.uniform(chain.lower(i), chain.upper(i));
    return q;
  };
  Episode ep;
  ep.q_start = draw();
  const Eigen::VectorXd q_goal = draw();
  const Transform cam_from_base = setup.cam_from_base();
  ep.start_pose = true_pose(chain, ep.q_start, cam_from_base);
  ep.goal_pose = true_pose(chain, q_goal, cam_from_base);
  return ep;
}

struct StepRecord {
  Transform goal, actual;  // camera frame
  Eigen::VectorXd qdot, q_true, readings;
  Eigen::VectorXd objective;  // linear+roll (4) or full twist (6) monitor
  double V = 0.0;
  bool ik_converged = true;
};

struct RolloutRecord {
  std::vector<StepRecord> steps;
  Eigen::Vector4d bias = Eigen::Vector4d::Zero();
  bool converged = false;
  bool diverged = false;
  int iters = 0;
  int ik_flags = 0;                // steps whose inner IK solve did not converge
  int reading_limit_warnings = 0;  // steps with readings outside the limits
  double max_assumption1_ratio = 0.0;
  Transform final_pose, final_goal;
  double final_pos_m = 0.0, final_ori_rad = 0.0;
  double rms_pos_m = 0.0, rms_ori_rad = 0.0;
};

struct Metrics {
  double final_pos_m = 0.0, final_ori_rad = 0.0;
  double rms_pos_m = 0.0, rms_ori_rad = 0.0;
};

/// Final errors against the episode goal plus RMS tracking errors against the
/// instantaneous goal over the executed steps.
inline Metrics metrics(const RolloutRecord& rec) {
  Metrics m;
  m.final_pos_m = translation_distance(rec.final_pose, rec.final_goal);
  m.final_ori_rad = rotation_distance(rec.final_pose, rec.final_goal);
  if (rec.steps.empty()) {
    m.rms_pos_m = m.final_pos_m;
    m.rms_ori_rad = m.final_ori_rad;
    return m;
  }
  double sp = 0.0, so = 0.0;
  for (const StepRecord& s : rec.steps) {
    const double dp = translation_distance(s.actual, s.goal);
    const double dw = rotation_distance(s.actual, s.goal);
    sp += dp * dp;
    so += dw * dw;
  }
  m.rms_pos_m = std::sqrt(sp / rec.steps.size());
  m.rms_ori_rad = std::sqrt(so / rec.steps.size());
  return m;
}

/// Biased insertion readings can pass through zero, where W and D are not
/// invertible. The tracking loop cannot act on a reading inside the guard
/// band, so it is pushed to the band edge and the lumped correction is refit;
/// the reconstruction identity then holds for the sanitized readings too.
inline void sanitize_insertion_reading(const ChainModel& chain, TrackedState& t) {
  if (std::abs(t.readings(2)) > chain.insertion_guard) return;
  const Transform observed = tracked_tip_pose(chain, t);
  const double edge = chain.insertion_guard * 1.001;
  t.readings(2) = t.readings(2) >= 0.0 ? edge : -edge;
  t.lumped = lumped_correction(observed, t.readings, t.camera_extrinsic, chain);
}

/// One simulated episode: stage 1 tracks an interpolated goal, stage 2 holds
/// the end pose; convergence against the final goal exits early; singular or
/// non-finite steps abort the rollout and mark it diverged.
inline RolloutRecord run_rollout(const SimSetup& setup, ControllerKind kind,
                                 const ErrorState& err, const EpisodeConfig& cfg,
                                 const Episode& ep) {
  cfg.validate();
  const ChainModel& chain = setup.chain;
  const Transform cam_from_base = setup.cam_from_base();
  const Transform initial_calib =
      setup.camera_extrinsic.relabeled(kCameraFrame, chain.base_frame);
  IkController ik;

  RolloutRecord rec;
  rec.bias = err.bias;
  rec.final_goal = ep.goal_pose;
  rec.steps.reserve(cfg.total_iters);

  Eigen::VectorXd q = ep.q_start;
  Transform pose = true_pose(chain, q, cam_from_base);
  int t = 0;
  for (; t < cfg.total_iters; ++t) {
    if (translation_distance(pose, ep.goal_pose) <= cfg.converge_pos &&
        rotation_distance(pose, ep.goal_pose) <= cfg.converge_ori) {
      rec.converged = true;
      break;
    }
    const double s = std::min(1.0, static_cast<double>(t) / cfg.trajectory_iters);
    const Transform goal = interpolate_pose(ep.start_pose, ep.goal_pose, s);
    try {
      TrackedState tracked = track(chain, q, err, setup.camera_extrinsic);
      if (!tracked.readings_within_limits) ++rec.reading_limit_warnings;
      sanitize_insertion_reading(chain, tracked);

      ControlCommand cmd;
      switch (kind) {
        case ControllerKind::Rr:
          cmd = rr_step(chain, goal, tracked, cfg.alpha);
          break;
        case ControllerKind::Ik:
          cmd = ik.step(chain, goal, tracked, cfg.alpha);
          break;
        default:
          cmd = baseline_step(chain, goal, tracked.readings, initial_calib, cfg.alpha);
      }
      if (!cmd.ik_converged) ++rec.ik_flags;
      if (!cmd.qdot.allFinite()) throw std::runtime_error("non-finite command");

      StepRecord step;
      step.goal = goal;
      step.actual = pose;
      step.qdot = cmd.qdot;
      step.q_true = q;
      step.readings = tracked.readings;
      if (chain.inview.empty()) {
        const Transform cur = tracked_nb_pose(chain, tracked);
        step.objective = objective_oov(goal, cur, cur.rotation());
      } else {
        const Transform cur = tracked_tip_pose(chain, tracked);
        step.objective = objective_full(goal, cur, cur.rotation());
      }
      step.V = 0.5 * step.objective.squaredNorm();
      step.ik_converged = cmd.ik_converged;
      rec.steps.push_back(std::move(step));

      const double roll_rate = std::abs(cmd.qdot(3));
      if (roll_rate > 1e-6) {
        rec.max_assumption1_ratio =
            std::max(rec.max_assumption1_ratio,
                     std::abs(cmd.qdot(0) * std::sin(q(1))) / roll_rate);
      }

      q = chain.clamp(q + cfg.step_size * cmd.qdot);
      pose = true_pose(chain, q, cam_from_base);
      if (!pose.translation().allFinite()) throw std::runtime_error("non-finite pose");
    } catch (const FrameMismatch&) {
      throw;  // label mismatches are bugs, not numeric failures
    } catch (const std::runtime_error&) {
      rec.diverged = true;
      ++t;
      break;
    }
  }
  rec.iters = t;
  rec.final_pose = pose;
  const Metrics m = metrics(rec);
  rec.final_pos_m = m.final_pos_m;
  rec.final_ori_rad = m.final_ori_rad;
  rec.rms_pos_m = m.rms_pos_m;
  rec.rms_ori_rad = m.rms_ori_rad;
  return rec;
}

/// Per-step inputs for the Lyapunov certificate monitor; only meaningful for
/// rollouts whose monitor objective is the 4D linear+roll error.
inline std::vector<LyapunovStepInput> lyapunov_inputs(const RolloutRecord& rec) {
  std::vector<LyapunovStepInput> out;
  out.reserve(rec.steps.size());
  for (const StepRecord& s : rec.steps) {
    LyapunovStepInput in;
    in.v = s.objective.size() == 4 ? Eigen::Vector4d(s.objective)
                                   : Eigen::Vector4d::Zero();
    in.q2 = s.q_true(1);
    in.q3 = s.q_true(2);
    in.qt2 = s.readings(1);
    in.qt3 = s.readings(2);
    in.e4 = rec.bias(3);
    out.push_back(in);
  }
  return out;
}

struct RolloutRow {
  ControllerKind controller = ControllerKind::Rr;
  ChainMode mode = ChainMode::OutOfView;
  double level_pct = 0.0;
  int traj_id = 0;
  std::uint64_t seed = 0;
  bool converged = false;
  bool diverged = false;
  double final_pos_mm = 0.0, final_ori_deg = 0.0;
  double rms_pos_mm = 0.0, rms_ori_deg = 0.0;
  int iters = 0;
  int ik_flags = 0;
  Eigen::Vector4d bias = Eigen::Vector4d::Zero();
};

struct AggregateRow {
  ControllerKind controller = ControllerKind::Rr;
  ChainMode mode = ChainMode::OutOfView;
  double level_pct = 0.0;
  int n = 0;
  double converged_rate = 0.0;
  double median_final_pos_mm = 0.0, iqr2_final_pos_mm = 0.0;
  double median_final_ori_deg = 0.0, iqr2_final_ori_deg = 0.0;
  double median_rms_pos_mm = 0.0, iqr2_rms_pos_mm = 0.0;
  double median_rms_ori_deg = 0.0, iqr2_rms_ori_deg = 0.0;
};

/// Linear-interpolation quantile of an unsorted sample.
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double h = p * (v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(h);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (h - i) * (v[i + 1] - v[i]);
}

inline double median(const std::vector<double>& v) { return quantile(v, 0.5); }
inline double iqr2(const std::vector<double>& v) {
  return 0.5 * (quantile(v, 0.75) - quantile(v, 0.25));
}

inline int worker_count(std::size_t jobs) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("RCMSTAB_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap > 0 && static_cast<unsigned>(cap) < hw) hw = static_cast<unsigned>(cap);
  }
  return static_cast<int>(std::min<std::size_t>(hw, std::max<std::size_t>(jobs, 1)));
}

/// Index-parallel loop; results must be written to preassigned slots so the
/// schedule cannot affect the output. The first worker exception is rethrown
/// on the calling thread.
template <typename F>
inline void parallel_for(std::size_t n, F&& fn) {
  const int workers = worker_count(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      try {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

struct SweepResult {
  std::vector<RolloutRow> rows;
  std::vector<AggregateRow> aggregates;
};

/// Full error sweep: per trajectory one episode and one sign pattern (shared
/// by every level and controller), bias magnitudes scaled by the level
/// fraction. Rollouts run in parallel; rows come back in (controller, level,
/// trajectory) order regardless of scheduling.
inline SweepResult run_sweep(const SimSetup& setup, const SweepConfig& sweep,
                             const EpisodeConfig& cfg) {
  sweep.validate();
  cfg.validate();
  if ((sweep.chain_mode == ChainMode::OutOfView) != setup.chain.inview.empty()) {
    throw std::invalid_argument("sweep chain mode does not match the chain model");
  }

  struct TrajData {
    Episode episode;
    Eigen::Vector4d signs;
    std::uint64_t seed;
  };
  std::vector<TrajData> trajs(sweep.trajectories);
  for (int k = 0; k < sweep.trajectories; ++k) {
    trajs[k].seed = Rng::mix(cfg.seed, 0xE0, static_cast<std::uint64_t>(k));
    trajs[k].episode = sample_episode(setup, trajs[k].seed);
    Rng sign_rng(Rng::mix(cfg.seed, 0x51, static_cast<std::uint64_t>(k)));
    trajs[k].signs = draw_bias_signs(sign_rng);
  }

  SweepResult out;
  const std::size_t jobs =
      sweep.controllers.size() * sweep.level_pcts.size() * sweep.trajectories;
  out.rows.resize(jobs);
  parallel_for(jobs, [&](std::size_t idx) {
    const std::size_t per_ctrl = sweep.level_pcts.size() * sweep.trajectories;
    const ControllerKind kind = sweep.controllers[idx / per_ctrl];
    const std::size_t rem = idx % per_ctrl;
    const double pct = sweep.level_pcts[rem / sweep.trajectories];
    const int traj = static_cast<int>(rem % sweep.trajectories);

    ErrorState err;
    err.bias = trajs[traj].signs.cwiseProduct((pct / 100.0) * sweep.e_max);
    err.calib_error = setup.calib_error;
    const RolloutRecord rec =
        run_rollout(setup, kind, err, cfg, trajs[traj].episode);

    RolloutRow& row = out.rows[idx];
    row.controller = kind;
    row.mode = sweep.chain_mode;
    row.level_pct = pct;
    row.traj_id = traj;
    row.seed = trajs[traj].seed;
    row.converged = rec.converged;
    row.diverged = rec.diverged;
    row.final_pos_mm = rec.final_pos_m * 1e3;
    row.final_ori_deg = rad2deg(rec.final_ori_rad);
    row.rms_pos_mm = rec.rms_pos_m * 1e3;
    row.rms_ori_deg = rad2deg(rec.rms_ori_rad);
    row.iters = rec.iters;
    row.ik_flags = rec.ik_flags;
    row.bias = rec.bias;
  });

  for (ControllerKind kind : sweep.controllers) {
    for (double pct : sweep.level_pcts) {
      std::vector<double> fp, fo, rp, ro;
      int n = 0, conv = 0;
      for (const RolloutRow& r : out.rows) {
        if (r.controller != kind || r.level_pct != pct) continue;
        ++n;
        conv += r.converged ? 1 : 0;
        fp.push_back(r.final_pos_mm);
        fo.push_back(r.final_ori_deg);
        rp.push_back(r.rms_pos_mm);
        ro.push_back(r.rms_ori_deg);
      }
      AggregateRow a;
      a.controller = kind;
      a.mode = sweep.chain_mode;
      a.level_pct = pct;
      a.n = n;
      a.converged_rate = n ? static_cast<double>(conv) / n : 0.0;
      a.median_final_pos_mm = median(fp);
      a.iqr2_final_pos_mm = iqr2(fp);
      a.median_final_ori_deg = median(fo);
      a.iqr2_final_ori_deg = iqr2(fo);
      a.median_rms_pos_mm = median(rp);
      a.iqr2_rms_pos_mm = iqr2(rp);
      a.median_rms_ori_deg = median(ro);
      a.iqr2_rms_ori_deg = iqr2(ro);
      out.aggregates.push_back(a);
    }
  }
  return out;
}

namespace detail {
inline void append_num(std::string& s, double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  s += buf;
}
inline void append_pct(std::string& s, double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", x);
  s += buf;
}
}  // namespace detail

inline std::string rollout_csv(const std::vector<RolloutRow>& rows) {
  std::string s =
      "controller,chain,level_pct,traj_id,seed,converged,final_pos_mm,"
      "final_ori_deg,rms_pos_mm,rms_ori_deg,iters\n";
  for (const RolloutRow& r : rows) {
    s += to_string(r.controller);
    s += ',';
    s += to_string(r.mode);
    s += ',';
    detail::append_pct(s, r.level_pct);
    s += ',' + std::to_string(r.traj_id);
    s += ',' + std::to_string(r.seed);
    s += ',' + std::to_string(r.converged ? 1 : 0);
    s += ',';
    detail::append_num(s, r.final_pos_mm);
    s += ',';
    detail::append_num(s, r.final_ori_deg);
    s += ',';
    detail::append_num(s, r.rms_pos_mm);
    s += ',';
    detail::append_num(s, r.rms_ori_deg);
    s += ',' + std::to_string(r.iters);
    s += '\n';
  }
  return s;
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::string s =
      "controller,chain,level_pct,n,converged_rate,median_final_pos_mm,"
      "iqr2_final_pos_mm,median_final_ori_deg,iqr2_final_ori_deg,"
      "median_rms_pos_mm,iqr2_rms_pos_mm,median_rms_ori_deg,iqr2_rms_ori_deg\n";
  for (const AggregateRow& a : rows) {
    s += to_string(a.controller);
    s += ',';
    s += to_string(a.mode);
    s += ',';
    detail::append_pct(s, a.level_pct);
    s += ',' + std::to_string(a.n);
    s += ',';
    detail::append_num(s, a.converged_rate);
    for (double x : {a.median_final_pos_mm, a.iqr2_final_pos_mm, a.median_final_ori_deg,
                     a.iqr2_final_ori_deg, a.median_rms_pos_mm, a.iqr2_rms_pos_mm,
                     a.median_rms_ori_deg, a.iqr2_rms_ori_deg}) {
      s += ',';
      detail::append_num(s, x);
    }
    s += '\n';
  }
  return s;
}

}  // namespace rcmstab
