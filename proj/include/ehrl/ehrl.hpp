#pragma once

// Umbrella header for the energy-harvesting routing library.

#include "ehrl/checkpoint.hpp"
#include "ehrl/config.hpp"
#include "ehrl/csv.hpp"
#include "ehrl/energy.hpp"
#include "ehrl/episode.hpp"
#include "ehrl/error.hpp"
#include "ehrl/esdsraa.hpp"
#include "ehrl/events.hpp"
#include "ehrl/experiment.hpp"
#include "ehrl/gap_trainer.hpp"
#include "ehrl/global_store.hpp"
#include "ehrl/harvest.hpp"
#include "ehrl/losses.hpp"
#include "ehrl/mlp.hpp"
#include "ehrl/observation.hpp"
#include "ehrl/optim.hpp"
#include "ehrl/packet.hpp"
#include "ehrl/policy.hpp"
#include "ehrl/qtable.hpp"
#include "ehrl/rate.hpp"
#include "ehrl/reward.hpp"
#include "ehrl/summarize.hpp"
#include "ehrl/thread_pool.hpp"
#include "ehrl/topology.hpp"
#include "ehrl/topology_io.hpp"
#include "ehrl/world.hpp"
