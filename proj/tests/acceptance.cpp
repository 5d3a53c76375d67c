// Acceptance suite: end-to-end checks of the numerical contracts, printed one
// line per criterion. Sweep-based criteria share two cached desk-scale runs.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

#include "oracles.hpp"
#include "rcmstab/rcmstab.hpp"

using namespace rcmstab;
using rcmstab::testing::fd_body_jacobian;
using rcmstab::testing::max_abs_diff;
using rcmstab::testing::random_admissible;

namespace {

constexpr std::uint64_t kSeed = 7;

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void report(int criterion, bool ok, const std::string& details) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, details.c_str());
  std::fflush(stdout);
  REQUIRE(ok);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

struct DeskSweep {
  SweepResult result;
  double seconds = 0.0;
};

const DeskSweep& desk_sweep(ChainMode mode) {
  static DeskSweep oov, full;
  DeskSweep& slot = mode == ChainMode::OutOfView ? oov : full;
  if (slot.result.rows.empty()) {
    const SimSetup setup = SimSetup::dvrk(mode);
    SweepConfig sweep;
    sweep.chain_mode = mode;
    sweep.level_pcts = {0.0, 33.0, 66.0, 83.3, 100.0};
    sweep.trajectories = 10;
    EpisodeConfig cfg;
    cfg.seed = kSeed;
    const Stopwatch watch;
    slot.result = run_sweep(setup, sweep, cfg);
    slot.seconds = watch.seconds();
  }
  return slot;
}

const AggregateRow& agg(const SweepResult& res, ControllerKind kind, double pct) {
  for (const AggregateRow& a : res.aggregates) {
    if (a.controller == kind && a.level_pct == pct) return a;
  }
  throw std::logic_error("missing aggregate row");
}

}  // namespace

TEST_CASE("criterion 1: DQWS decomposition identity") {
  Rng rng(1001);
  const ChainModel chain = ChainModel::dvrk(false);
  const Stopwatch watch;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector4d q = random_admissible(chain, rng);
    const JacobianFactors f = dqws_factors(q(1), q(2), q(3));
    worst = std::max(worst, max_abs_diff(f.D * f.Q * f.W * f.S, body_jacobian_oov(q)));
  }
  const double secs = watch.seconds();
  report(1, worst < 1e-9 && secs < 1.0,
         fmt("DQWS == J_nb over 1000 states, max |diff| = %.2e (%.2fs)", worst, secs));
}

TEST_CASE("criterion 2: analytic Jacobian matches finite differences") {
  Rng rng(1002);
  const ChainModel chain = ChainModel::dvrk(false);
  const Stopwatch watch;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector4d q = random_admissible(chain, rng);
    const Eigen::MatrixXd fd = fd_body_jacobian(
        [&](const Eigen::VectorXd& qq) { return fk_oov(chain, qq.head<4>()); }, q, 1e-6);
    worst = std::max(worst, max_abs_diff(body_jacobian_oov(q), fd));
  }
  const double secs = watch.seconds();
  report(2, worst < 1e-5 && secs < 5.0,
         fmt("central differences at h=1e-6, max |diff| = %.2e (%.2fs)", worst, secs));
}

TEST_CASE("criterion 3: certificate identities") {
  Rng rng(1003);
  double worst_m = 0.0, worst_h = 0.0, worst_q = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double q2 = rng.uniform(deg2rad(-53.0), deg2rad(53.0));
    const double q3 = rng.uniform(0.06, 0.24);
    worst_m = std::max(worst_m, max_abs_diff(matrix_M(q2, q3, q2, q3, 0.0),
                                             Eigen::Matrix4d::Identity()));
    worst_h = std::max(worst_h, max_abs_diff(hessian_H(q2, q3, q2, q3, 0.0),
                                             2.0 * Eigen::Matrix4d::Identity()));
    const double qt2 = rng.uniform(deg2rad(-53.0), deg2rad(53.0));
    const double qt3 = rng.uniform(0.06, 0.24);
    const double e4 = rng.uniform(-1.5, 1.5);
    const Eigen::Matrix4d m = matrix_M(q2, q3, qt2, qt3, e4);
    const Eigen::Matrix4d h = hessian_H(q2, q3, qt2, qt3, e4);
    for (int k = 0; k < 20; ++k) {
      const Eigen::Vector4d x = Eigen::Vector4d::NullaryExpr([&] { return rng.uniform(-1.0, 1.0); });
      worst_q = std::max(worst_q, std::abs(x.dot(h * x) - 2.0 * x.dot(m * x)));
    }
  }
  report(3, worst_m <= 1e-12 && worst_h <= 1e-12 && worst_q < 1e-10,
         fmt("M(q,q,0)=I, H(q,q,0)=2I (|diff| <= %.1e), x'Hx=2x'Mx (|diff| = %.1e)",
             std::max(worst_m, worst_h), worst_q));
}

TEST_CASE("criterion 4: error bound for dVRK-like pitch limits") {
  const Stopwatch watch;
  const TauResult r = derive_tau(deg2rad(-53.0), deg2rad(53.0), deg2rad(0.25));
  const double secs = watch.seconds();
  const double tau_deg = rad2deg(r.tau);
  const double gap = std::abs(tau_deg - rad2deg(r.tau_closed_form));
  report(4, tau_deg > 74.0 && tau_deg < 77.0 && gap < 0.5 && secs < 10.0,
         fmt("tau = %.2f deg (closed form %.2f, grid step 0.25 deg, %.2fs)", tau_deg,
             rad2deg(r.tau_closed_form), secs));
}

TEST_CASE("criterion 5: out-of-view resolved-rate sweep") {
  const DeskSweep& sweep = desk_sweep(ChainMode::OutOfView);
  bool ok = sweep.seconds < 60.0;
  double worst_pos = 0.0, worst_ori = 0.0;
  for (const double pct : {0.0, 33.0, 66.0}) {
    const AggregateRow& a = agg(sweep.result, ControllerKind::Rr, pct);
    worst_pos = std::max(worst_pos, a.median_final_pos_mm);
    worst_ori = std::max(worst_ori, a.median_final_ori_deg);
  }
  ok = ok && worst_pos < 1.5 && worst_ori < 1.0;
  const double at100 = agg(sweep.result, ControllerKind::Rr, 100.0).median_final_pos_mm;
  ok = ok && at100 > 10.0;
  report(5, ok,
         fmt("RR medians <=66%%: pos %.2f mm, ori %.2f deg; at 100%%: %.1f mm",
             worst_pos, worst_ori, at100) +
             fmt(" (sweep %.1fs)", sweep.seconds));
}

TEST_CASE("criterion 6: calibration-only baseline fails by 33%") {
  const double oov33 =
      agg(desk_sweep(ChainMode::OutOfView).result, ControllerKind::Baseline, 33.0)
          .median_final_pos_mm;
  const double full33 =
      agg(desk_sweep(ChainMode::Full).result, ControllerKind::Baseline, 33.0)
          .median_final_pos_mm;
  report(6, oov33 > 10.0 && full33 > 10.0,
         fmt("baseline median at 33%%: %.1f mm (oov), %.1f mm (full)", oov33, full33));
}

TEST_CASE("criterion 7: full-chain IK and RR are interchangeable under moderate bias") {
  const SweepResult& res = desk_sweep(ChainMode::Full).result;
  bool ok = true;
  double worst_ratio = 1.0, worst_pos = 0.0;
  for (const double pct : {0.0, 33.0, 66.0}) {
    const double rr = agg(res, ControllerKind::Rr, pct).median_final_pos_mm;
    const double ik = agg(res, ControllerKind::Ik, pct).median_final_pos_mm;
    const double ratio = std::max(rr, ik) / std::max(1e-9, std::min(rr, ik));
    worst_ratio = std::max(worst_ratio, ratio);
    worst_pos = std::max(worst_pos, std::max(rr, ik));
    ok = ok && ratio <= 2.0 && rr < 2.0 && ik < 2.0;
  }
  report(7, ok,
         fmt("medians <=66%%: worst IK/RR ratio %.2f, worst median %.2f mm", worst_ratio,
             worst_pos));
}

TEST_CASE("criterion 8: IK struggles on the underactuated chain at high bias") {
  const SweepResult& res = desk_sweep(ChainMode::OutOfView).result;
  int rr_conv = 0, ik_conv = 0, ik_rollouts = 0, ik_flagged = 0;
  for (const RolloutRow& row : res.rows) {
    if (row.level_pct < 83.0) continue;
    if (row.controller == ControllerKind::Rr) rr_conv += row.converged ? 1 : 0;
    if (row.controller == ControllerKind::Ik) {
      ++ik_rollouts;
      ik_conv += row.converged ? 1 : 0;
      ik_flagged += row.ik_flags > 0 ? 1 : 0;
    }
  }
  const double flag_rate = ik_rollouts ? static_cast<double>(ik_flagged) / ik_rollouts : 0.0;
  const bool ok = ik_conv < rr_conv || flag_rate > 0.2;
  report(8, ok,
         fmt("levels >= 83.3%%: IK converged %.0f vs RR %.0f rollouts; "
             "nonconvergence flags in %.0f%% of IK rollouts",
             static_cast<double>(ik_conv), static_cast<double>(rr_conv),
             100.0 * flag_rate));
}

TEST_CASE("criterion 9: Lyapunov rate certificate") {
  Rng rng(1009);
  const double alpha = 1.0 / 6.0;
  int agree = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const double q2 = rng.uniform(deg2rad(-53.0), deg2rad(53.0));
    const double qt2 = rng.uniform(deg2rad(-53.0), deg2rad(53.0));
    const double q3 = rng.uniform(0.06, 0.24);
    const double qt3 = rng.uniform(0.06, 0.24);
    const double qt4 = rng.uniform(-kPi / 2, kPi / 2);
    const double e4 = rng.uniform(-deg2rad(70.0), deg2rad(70.0));
    const Eigen::Vector4d v = Eigen::Vector4d::NullaryExpr([&] { return rng.uniform(-0.5, 0.5); });

    const double analytic = lyapunov_rate(v, q2, q3, qt2, qt3, qt4, e4, alpha);
    const Eigen::Matrix4d qw = q_factor(qt4 + e4) * w_factor(q2, q3);
    const Eigen::Matrix4d qtwt = q_factor(qt4) * w_factor(qt2, qt3);
    const Eigen::Vector4d vdot = -alpha * (qw * pinv(qtwt) * v).eval();
    const double h = 1e-4;
    const double fd =
        (lyapunov_value((v + h * vdot).eval()) - lyapunov_value(v)) / h;
    if (analytic * fd > 0.0 || (std::abs(analytic) < 1e-12 && std::abs(fd) < 1e-8)) ++agree;
  }

  // Zero-bias rollout: V must not increase once the goal is stationary.
  const SimSetup setup = SimSetup::dvrk(ChainMode::OutOfView);
  EpisodeConfig cfg;
  cfg.seed = kSeed;
  const Episode ep = sample_episode(setup, 31);
  const RolloutRecord rec = run_rollout(setup, ControllerKind::Rr, ErrorState{}, cfg, ep);
  bool monotone = rec.steps.size() > static_cast<std::size_t>(cfg.trajectory_iters);
  for (std::size_t t = cfg.trajectory_iters + 1; t < rec.steps.size(); ++t) {
    if (rec.steps[t].V > rec.steps[t - 1].V * (1.0 + 1e-12) + 1e-18) monotone = false;
  }
  report(9, agree >= n * 99 / 100 && monotone,
         fmt("sign agreement %.1f%% over 1000 states; zero-bias V monotone: ",
             100.0 * agree / n) +
             (monotone ? "yes" : "no"));
}

TEST_CASE("criterion 10: benchmark output is deterministic") {
  const SimSetup setup = SimSetup::dvrk(ChainMode::OutOfView);
  SweepConfig sweep;
  sweep.level_pcts = {0.0, 83.3};
  sweep.trajectories = 4;
  EpisodeConfig cfg;
  cfg.seed = kSeed;
  const SweepResult a = run_sweep(setup, sweep, cfg);
  const SweepResult b = run_sweep(setup, sweep, cfg);
  const bool ok = rollout_csv(a.rows) == rollout_csv(b.rows) &&
                  aggregate_csv(a.aggregates) == aggregate_csv(b.aggregates);
  report(10, ok, "identical seeds produce byte-identical rollout and aggregate CSV");
}
