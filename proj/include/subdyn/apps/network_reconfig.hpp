#pragma once

#include "subdyn/apps/network_reconfig/graph.hpp"
#include "subdyn/apps/network_reconfig/network.hpp"
#include "subdyn/apps/network_reconfig/power_flow.hpp"
#include "subdyn/apps/network_reconfig/reconfig.hpp"
