#pragma once

#include "cli.hpp"
#include "config.hpp"
#include "datacenter.hpp"
#include "engine.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "network.hpp"
#include "rng.hpp"
#include "run.hpp"
#include "scheduler.hpp"
#include "text.hpp"
#include "topology.hpp"
#include "workload.hpp"
