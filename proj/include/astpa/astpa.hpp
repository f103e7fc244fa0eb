#pragma once

#include "astpa/benchmarks.hpp"
#include "astpa/core.hpp"
#include "astpa/estimator.hpp"
#include "astpa/gmm.hpp"
#include "astpa/harness.hpp"
#include "astpa/hmc.hpp"
#include "astpa/qnp.hpp"
#include "astpa/subset_simulation.hpp"
#include "astpa/target_model.hpp"
