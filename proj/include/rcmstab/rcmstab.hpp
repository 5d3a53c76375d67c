#pragma once

#include "rcmstab/bench.hpp"
#include "rcmstab/chain.hpp"
#include "rcmstab/config.hpp"
#include "rcmstab/control.hpp"
#include "rcmstab/error_model.hpp"
#include "rcmstab/geom.hpp"
#include "rcmstab/pinv.hpp"
#include "rcmstab/rng.hpp"
#include "rcmstab/stability.hpp"
