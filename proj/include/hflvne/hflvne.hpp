#pragma once

#include "hflvne/agent.hpp"
#include "hflvne/baselines.hpp"
#include "hflvne/config.hpp"
#include "hflvne/engine.hpp"
#include "hflvne/errors.hpp"
#include "hflvne/experiment.hpp"
#include "hflvne/federation.hpp"
#include "hflvne/metrics.hpp"
#include "hflvne/record.hpp"
#include "hflvne/substrate.hpp"
#include "hflvne/validator.hpp"
#include "hflvne/workload.hpp"
