#pragma once

// Umbrella header: the evolutionary relaxation solver library.

#include "evosr/cluster.hpp"
#include "evosr/config.hpp"
#include "evosr/engine.hpp"
#include "evosr/errors.hpp"
#include "evosr/evolution.hpp"
#include "evosr/linear_system.hpp"
#include "evosr/metrics.hpp"
#include "evosr/net.hpp"
#include "evosr/problem.hpp"
#include "evosr/report.hpp"
#include "evosr/rng.hpp"
#include "evosr/selection.hpp"
#include "evosr/wire.hpp"
