#pragma once

// Umbrella header for the federated gradient-descent simulator.

#include "fedsim/baselines.hpp"
#include "fedsim/config.hpp"
#include "fedsim/control.hpp"
#include "fedsim/data.hpp"
#include "fedsim/engine.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/harness.hpp"
#include "fedsim/models.hpp"
#include "fedsim/protocol.hpp"
#include "fedsim/resources.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/trace.hpp"
#include "fedsim/vec.hpp"
