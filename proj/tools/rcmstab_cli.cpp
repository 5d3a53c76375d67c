// Command-line harness: error sweeps, single rollouts, the stability bound,
// and a library self-check. Exit codes: 0 success, 1 validation failure,
// 2 configuration or usage error.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rcmstab/rcmstab.hpp"

namespace {

using namespace rcmstab;

std::string derived_agg_path(const std::string& out) {
  const std::string suffix = ".csv";
  if (out.size() > suffix.size() &&
      out.compare(out.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return out.substr(0, out.size() - suffix.size()) + ".agg.csv";
  }
  return out + ".agg.csv";
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << contents;
}

std::string axis_angle_csv(const Transform& t) {
  const Eigen::Vector3d p = t.translation();
  const Eigen::Vector3d w = log_so3(t.rotation());
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.9f,%.9f,%.9f,%.9f,%.9f,%.9f", p(0), p(1), p(2),
                w(0), w(1), w(2));
  return buf;
}

std::string step_csv(const RolloutRecord& rec) {
  std::string s =
      "iter,goal_x,goal_y,goal_z,goal_wx,goal_wy,goal_wz,"
      "act_x,act_y,act_z,act_wx,act_wy,act_wz,V";
  const int n = rec.steps.empty() ? 0 : static_cast<int>(rec.steps.front().qdot.size());
  for (int i = 1; i <= n; ++i) s += ",qd" + std::to_string(i);
  s += '\n';
  for (std::size_t t = 0; t < rec.steps.size(); ++t) {
    const StepRecord& step = rec.steps[t];
    s += std::to_string(t) + ',' + axis_angle_csv(step.goal) + ',' +
         axis_angle_csv(step.actual);
    char buf[64];
    std::snprintf(buf, sizeof(buf), ",%.12g", step.V);
    s += buf;
    for (int i = 0; i < step.qdot.size(); ++i) {
      std::snprintf(buf, sizeof(buf), ",%.12g", step.qdot(i));
      s += buf;
    }
    s += '\n';
  }
  return s;
}

struct CommonFlags {
  std::string config_path;
  std::string chain = "";
  std::uint64_t seed = 0;
  bool seed_set = false;
  double alpha = 0.0;

  AppConfig load() const {
    AppConfig cfg = config_path.empty() ? AppConfig{} : load_config(config_path);
    if (seed_set) cfg.episode.seed = seed;
    if (alpha > 0.0) cfg.episode.alpha = alpha;
    if (!chain.empty()) cfg.sweep.chain_mode = parse_chain_mode(chain);
    return cfg;
  }
};

int run_bench(const CommonFlags& common, const std::vector<std::string>& controllers,
              int levels, const std::vector<double>& level_pcts, bool full_scale,
              int trajectories, const std::string& out_path,
              std::string agg_path) {
  AppConfig cfg = common.load();
  if (!controllers.empty()) {
    cfg.sweep.controllers.clear();
    for (const std::string& c : controllers) {
      cfg.sweep.controllers.push_back(parse_controller(c));
    }
  }
  if (full_scale) {
    cfg.sweep.trajectories = 50;
    levels = 51;
  }
  if (!level_pcts.empty()) {
    cfg.sweep.level_pcts = level_pcts;
  } else if (levels > 0) {
    cfg.sweep.level_pcts.clear();
    for (int i = 0; i < levels; ++i) {
      cfg.sweep.level_pcts.push_back(levels == 1 ? 0.0 : 100.0 * i / (levels - 1));
    }
  }
  if (trajectories > 0) cfg.sweep.trajectories = trajectories;

  const SimSetup setup = cfg.make_setup(cfg.sweep.chain_mode);
  const SweepResult res = run_sweep(setup, cfg.sweep, cfg.episode);
  if (agg_path.empty()) agg_path = derived_agg_path(out_path);
  write_file(out_path, rollout_csv(res.rows));
  write_file(agg_path, aggregate_csv(res.aggregates));
  std::cout << "wrote " << res.rows.size() << " rollouts to " << out_path << " and "
            << res.aggregates.size() << " aggregate rows to " << agg_path << "\n";
  return 0;
}

int run_rollout_cmd(const CommonFlags& common, const std::string& controller,
                    double level_pct, const std::vector<double>& bias_flat,
                    int traj, const std::string& out_path) {
  AppConfig cfg = common.load();
  const ChainMode mode = cfg.sweep.chain_mode;
  const SimSetup setup = cfg.make_setup(mode);

  ErrorState err = cfg.make_error(mode);
  if (!bias_flat.empty()) {
    if (bias_flat.size() != 4) throw ConfigError("--bias needs 4 values: deg,deg,m,deg");
    err.bias = Eigen::Vector4d(deg2rad(bias_flat[0]), deg2rad(bias_flat[1]), bias_flat[2],
                               deg2rad(bias_flat[3]));
  } else if (level_pct >= 0.0) {
    Rng sign_rng(Rng::mix(cfg.episode.seed, 0x51, static_cast<std::uint64_t>(traj)));
    err.bias = draw_bias_signs(sign_rng).cwiseProduct((level_pct / 100.0) * cfg.sweep.e_max);
  }

  const Episode ep = sample_episode(
      setup, Rng::mix(cfg.episode.seed, 0xE0, static_cast<std::uint64_t>(traj)));
  const RolloutRecord rec =
      run_rollout(setup, parse_controller(controller), err, cfg.episode, ep);
  if (!out_path.empty()) write_file(out_path, step_csv(rec));

  std::cout << "controller=" << controller << " chain=" << to_string(mode)
            << " bias(deg,deg,m,deg)=[" << rad2deg(rec.bias(0)) << ", "
            << rad2deg(rec.bias(1)) << ", " << rec.bias(2) << ", "
            << rad2deg(rec.bias(3)) << "]\n";
  std::cout << (rec.converged ? "converged" : rec.diverged ? "diverged" : "not converged")
            << " after " << rec.iters << " iterations\n";
  std::cout << "final error: " << rec.final_pos_m * 1e3 << " mm, "
            << rad2deg(rec.final_ori_rad) << " deg; rms tracking: " << rec.rms_pos_m * 1e3
            << " mm, " << rad2deg(rec.rms_ori_rad) << " deg\n";
  if (rec.reading_limit_warnings > 0) {
    std::cerr << "warning: readings left the joint limits in "
              << rec.reading_limit_warnings << " steps\n";
  }
  if (rec.max_assumption1_ratio > 0.1) {
    std::cerr << "warning: |qd1 sin q2| / |qd4| peaked at " << rec.max_assumption1_ratio
              << " (> 0.1)\n";
  }
  return 0;
}

int run_tau(const CommonFlags& common, double pitch_limit_deg, double grid_res_deg) {
  double lo, hi;
  if (pitch_limit_deg > 0.0) {
    lo = deg2rad(-pitch_limit_deg);
    hi = deg2rad(pitch_limit_deg);
  } else {
    const AppConfig cfg = common.load();
    const SimSetup setup = cfg.make_setup(ChainMode::OutOfView);
    lo = setup.chain.lower(1);
    hi = setup.chain.upper(1);
  }
  const TauResult r = derive_tau(lo, hi, deg2rad(grid_res_deg));
  std::printf("tau = %.2f deg (closed form %.2f deg, grid %.3g deg)\n", rad2deg(r.tau),
              rad2deg(r.tau_closed_form), grid_res_deg);
  std::printf("binding configuration: q2 = %.2f deg, q2 reading = %.2f deg\n",
              rad2deg(r.q2_binding), rad2deg(r.qt2_binding));
  return 0;
}

int run_validate() {
  int failures = 0;
  const auto check = [&](const char* name, bool ok) {
    std::printf("[%s] %s\n", ok ? "ok" : "FAIL", name);
    if (!ok) ++failures;
  };
  Rng rng(424242);

  {
    bool ok = true;
    for (int i = 0; i < 200 && ok; ++i) {
      Eigen::Vector3d w(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
      const Rotation r = exp_so3(w);
      ok = r.is_orthonormal() && (w.norm() > 3.0 || (log_so3(r) - w).norm() < 1e-8);
    }
    check("rotation exp/log round trip and orthonormality", ok);
  }
  {
    bool ok = true;
    for (int i = 0; i < 100 && ok; ++i) {
      const Transform a(exp_so3({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)}),
                        {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
      const Transform b(exp_so3({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)}),
                        {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
      ok = (adjoint(a * b) - adjoint(a) * adjoint(b)).cwiseAbs().maxCoeff() < 1e-9;
    }
    check("adjoint homomorphism", ok);
  }
  {
    bool threw = false;
    try {
      (void)(Transform::identity("a") * Transform::identity("b"));
    } catch (const FrameMismatch&) {
      threw = true;
    }
    check("frame label enforcement", threw);
  }
  const ChainModel oov_chain = ChainModel::dvrk(false);
  {
    bool ok = true;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      Eigen::Vector4d q;
      for (int j = 0; j < 4; ++j) q(j) = rng.uniform(oov_chain.lower(j), oov_chain.upper(j));
      const JacobianFactors f = dqws_factors(q(1), q(2), q(3));
      worst = std::max(worst, ((f.D * f.Q * f.W * f.S) - body_jacobian_oov(q))
                                  .cwiseAbs()
                                  .maxCoeff());
    }
    ok = worst < 1e-9;
    check("D Q W S decomposition identity", ok);
  }
  {
    bool ok = true;
    for (int i = 0; i < 100 && ok; ++i) {
      Eigen::Vector4d q;
      for (int j = 0; j < 4; ++j) q(j) = rng.uniform(oov_chain.lower(j), oov_chain.upper(j));
      const double h = 1e-6;
      const Matrix64 j_analytic = body_jacobian_oov(q);
      // central differences of the body twist
      const Eigen::Matrix3d rt = fk_oov(oov_chain, q).rotation().matrix().transpose();
      for (int c = 0; c < 4 && ok; ++c) {
        Eigen::Vector4d qp = q, qm = q;
        qp(c) += h;
        qm(c) -= h;
        const Transform tp = fk_oov(oov_chain, qp), tm = fk_oov(oov_chain, qm);
        const Eigen::Vector3d dp = rt * (tp.translation() - tm.translation()) / (2 * h);
        const Eigen::Matrix3d dr =
            rt * (tp.rotation().matrix() - tm.rotation().matrix()) / (2 * h);
        const Eigen::Vector3d dw(dr(2, 1), dr(0, 2), dr(1, 0));
        ok = (dp - j_analytic.col(c).head<3>()).norm() < 1e-5 &&
             (dw - j_analytic.col(c).tail<3>()).norm() < 1e-5;
      }
      ok = ok && std::abs(fk_oov(oov_chain, q).translation().norm() - q(2)) < 1e-12;
    }
    check("analytic Jacobian vs finite differences; pivot distance = insertion", ok);
  }
  {
    const SimSetup setup = SimSetup::dvrk(ChainMode::Full);
    bool ok = true;
    for (int i = 0; i < 50 && ok; ++i) {
      Eigen::VectorXd q(6);
      for (int j = 0; j < 6; ++j) q(j) = rng.uniform(setup.chain.lower(j), setup.chain.upper(j));
      ErrorState err;
      err.bias = Eigen::Vector4d(0, rng.uniform(-0.4, 0.4), rng.uniform(-0.04, 0.04),
                                 rng.uniform(-1, 1));
      const Transform truth = true_pose(setup.chain, q, setup.cam_from_base());
      const TrackedState tracked = track(setup.chain, q, err, setup.camera_extrinsic);
      const Transform believed = tracked_tip_pose(setup.chain, tracked);
      ok = translation_distance(truth, believed) < 1e-10 &&
           (truth.rotation().matrix() - believed.rotation().matrix())
                   .cwiseAbs()
                   .maxCoeff() < 1e-10;
    }
    check("perfect-tracking reconstruction identity", ok);
  }
  {
    bool ok = true;
    for (int i = 0; i < 100 && ok; ++i) {
      const double q2 = rng.uniform(-0.9, 0.9), q3 = rng.uniform(0.06, 0.24);
      ok = (matrix_M(q2, q3, q2, q3, 0) - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() == 0 &&
           (hessian_H(q2, q3, q2, q3, 0) - 2 * Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() == 0;
    }
    check("certificate identities M=I, H=2I at zero error", ok);
  }
  {
    bool ok = true;
    for (int i = 0; i < 200 && ok; ++i) {
      Eigen::Matrix4d a = Eigen::Matrix4d::NullaryExpr([&] { return rng.uniform(-1, 1); });
      const Eigen::Matrix4d h = 0.5 * (a + a.transpose());
      const bool eig =
          Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d>(h).eigenvalues().minCoeff() > 0;
      ok = sylvester_pd(h).positive_definite == eig;
    }
    check("Sylvester test agrees with eigenvalues", ok);
  }
  {
    const TauResult r = derive_tau(deg2rad(-53.0), deg2rad(53.0), deg2rad(0.25));
    check("error bound reproduction (74..77 deg, grid vs closed form)",
          rad2deg(r.tau) > 74.0 && rad2deg(r.tau) < 77.0 &&
              std::abs(rad2deg(r.tau) - rad2deg(r.tau_closed_form)) < 0.5);
  }
  {
    bool ok = true;
    for (int i = 0; i < 50 && ok; ++i) {
      Vector6d v;
      for (int j = 0; j < 6; ++j) v(j) = rng.uniform(-0.1, 0.1);
      Eigen::MatrixXd j_in = Eigen::MatrixXd::NullaryExpr(6, 2, [&] { return rng.uniform(-1, 1); });
      const Matrix6d ad = adjoint(Transform(exp_so3({rng.uniform(-1, 1), 0, 1}),
                                            {rng.uniform(-0.1, 0.1), 0, 0}));
      const Matrix64 d = d_factor(rng.uniform(0.06, 0.24));
      const BilevelSplit s = bilevel_allocate(v, j_in, ad, d);
      ok = (s.v_inview + ad * d * s.v_oov - v).cwiseAbs().maxCoeff() < 1e-10;
      const Eigen::MatrixXd jjp = j_in * pinv(j_in);
      ok = ok && (jjp * jjp - jjp).cwiseAbs().maxCoeff() < 1e-9;
    }
    check("bilevel split consistency and projector idempotence", ok);
  }
  {
    const SimSetup setup = SimSetup::dvrk(ChainMode::OutOfView);
    SweepConfig sweep;
    sweep.level_pcts = {0.0, 66.0};
    sweep.trajectories = 2;
    sweep.controllers = {ControllerKind::Rr};
    EpisodeConfig cfg;
    cfg.seed = 1;
    cfg.total_iters = 120;
    cfg.trajectory_iters = 30;
    const SweepResult a = run_sweep(setup, sweep, cfg);
    const SweepResult b = run_sweep(setup, sweep, cfg);
    check("sweep determinism", rollout_csv(a.rows) == rollout_csv(b.rows) &&
                                   aggregate_csv(a.aggregates) == aggregate_csv(b.aggregates));
  }
  {
    bool ok = true;
    for (const ChainMode mode : {ChainMode::OutOfView, ChainMode::Full}) {
      const SimSetup setup = SimSetup::dvrk(mode);
      EpisodeConfig cfg;
      const Episode ep = sample_episode(setup, 77);
      for (const ControllerKind kind :
           {ControllerKind::Rr, ControllerKind::Ik, ControllerKind::Baseline}) {
        const RolloutRecord rec = run_rollout(setup, kind, ErrorState{}, cfg, ep);
        ok = ok && rec.converged;
      }
    }
    check("zero-bias rollouts converge for all controllers", ok);
  }

  if (failures > 0) {
    std::printf("%d validation check(s) failed\n", failures);
    return 1;
  }
  std::printf("all validation checks passed\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RCM manipulator control benchmark under out-of-view joint errors"};
  app.require_subcommand(1);

  CommonFlags common;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON configuration file");
    sub->add_option("--chain", common.chain, "chain mode: oov or full");
    sub->add_option("--seed", common.seed, "master seed")->each([&](const std::string&) {
      common.seed_set = true;
    });
    sub->add_option("--alpha", common.alpha, "controller gain");
  };

  // bench
  auto* bench = app.add_subcommand("bench", "run an error sweep and write CSV results");
  std::vector<std::string> controllers;
  std::vector<double> level_pcts;
  int levels = 0, trajectories = 0;
  bool full_scale = false;
  std::string out_path = "bench.csv", agg_path;
  add_common(bench);
  bench->add_option("--controller", controllers, "controllers to run (rr, ik, baseline)")
      ->delimiter(',');
  bench->add_option("--levels", levels, "number of evenly spaced error levels 0..100%");
  bench->add_option("--level-pcts", level_pcts, "explicit error levels in percent")
      ->delimiter(',');
  bench->add_flag("--full-scale", full_scale, "51 levels x 50 trajectories");
  bench->add_option("--trajectories", trajectories, "episodes per level");
  bench->add_option("--out", out_path, "per-rollout CSV path");
  bench->add_option("--agg-out", agg_path, "aggregate CSV path (default: <out>.agg.csv)");

  // rollout
  auto* rollout = app.add_subcommand("rollout", "run one episode and write per-step CSV");
  std::string controller = "rr", steps_path;
  double level_pct = -1.0;
  std::vector<double> bias_flat;
  int traj = 0;
  add_common(rollout);
  rollout->add_option("--controller", controller, "rr, ik or baseline");
  rollout->add_option("--level-pct", level_pct, "error level in percent of e_max");
  rollout->add_option("--bias", bias_flat, "explicit bias: deg,deg,m,deg")->delimiter(',');
  rollout->add_option("--traj", traj, "trajectory index (seeds episode and signs)");
  rollout->add_option("--out", steps_path, "per-step CSV path");

  // tau
  auto* tau = app.add_subcommand("tau", "derive the roll-error stability bound");
  double pitch_limit = 0.0, grid_res = 0.25;
  add_common(tau);
  tau->add_option("--pitch-limit", pitch_limit, "symmetric pitch limit in degrees");
  tau->add_option("--grid-res", grid_res, "grid resolution in degrees");

  // validate
  auto* validate = app.add_subcommand("validate", "run the built-in invariant checks");
  (void)validate;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (bench->parsed()) {
      return run_bench(common, controllers, levels, level_pcts, full_scale, trajectories,
                       out_path, agg_path);
    }
    if (rollout->parsed()) {
      return run_rollout_cmd(common, controller, level_pct, bias_flat, traj, steps_path);
    }
    if (tau->parsed()) {
      return run_tau(common, pitch_limit, grid_res);
    }
    if (validate->parsed()) {
      return run_validate();
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
