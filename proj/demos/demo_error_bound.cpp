// Prints the roll-error stability bound as a function of the pitch limit.

#include <cstdio>

#include "rcmstab/stability.hpp"

using namespace rcmstab;

int main() {
  std::printf("pitch limit   tau (grid)   tau (closed form)\n");
  for (const double deg : {0.0, 15.0, 30.0, 45.0, 53.0, 60.0}) {
    const TauResult r = derive_tau(deg2rad(-deg), deg2rad(deg), deg2rad(0.5));
    std::printf("   +/-%4.1f     %7.2f deg     %7.2f deg\n", deg, rad2deg(r.tau),
                rad2deg(r.tau_closed_form));
  }
  return 0;
}
