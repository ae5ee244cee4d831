#pragma once

#include "hagsim/atsss.hpp"
#include "hagsim/config.hpp"
#include "hagsim/event_queue.hpp"
#include "hagsim/lia.hpp"
#include "hagsim/link.hpp"
#include "hagsim/metrics.hpp"
#include "hagsim/packet.hpp"
#include "hagsim/rng.hpp"
#include "hagsim/runner.hpp"
#include "hagsim/scenarios.hpp"
#include "hagsim/sim_time.hpp"
#include "hagsim/topology.hpp"
#include "hagsim/trace.hpp"
#include "hagsim/transport.hpp"
#include "hagsim/workload.hpp"
