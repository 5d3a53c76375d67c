// Minimal library tour: one clean rollout and one rollout past the roll-error
// stability bound, on the 4-joint out-of-view chain.

#include <cstdio>

#include "rcmstab/rcmstab.hpp"

using namespace rcmstab;

namespace {

void run(const char* label, const ErrorState& err) {
  const SimSetup setup = SimSetup::dvrk(ChainMode::OutOfView);
  EpisodeConfig cfg;
  cfg.seed = 2024;
  const Episode ep = sample_episode(setup, cfg.seed);
  const RolloutRecord rec = run_rollout(setup, ControllerKind::Rr, err, cfg, ep);
  std::printf("%-22s %-13s iters=%3d  final %7.2f mm / %6.2f deg\n", label,
              rec.converged ? "converged" : "not converged", rec.iters,
              rec.final_pos_m * 1e3, rad2deg(rec.final_ori_rad));
}

}  // namespace

int main() {
  run("zero bias:", ErrorState{});

  ErrorState roll_bias;
  roll_bias.bias(3) = deg2rad(60.0);  // inside the 75 deg bound
  run("60 deg roll bias:", roll_bias);

  roll_bias.bias(3) = deg2rad(90.0);  // beyond the bound: oscillates
  run("90 deg roll bias:", roll_bias);
  return 0;
}
