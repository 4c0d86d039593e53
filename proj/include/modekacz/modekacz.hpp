#pragma once

#include "modekacz/aggregation.hpp"
#include "modekacz/analysis.hpp"
#include "modekacz/blocklist_mc.hpp"
#include "modekacz/core_model.hpp"
#include "modekacz/harness.hpp"
#include "modekacz/solver.hpp"
