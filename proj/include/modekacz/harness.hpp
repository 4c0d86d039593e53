#pragma once

#include "modekacz/harness/adversary.hpp"
#include "modekacz/harness/config.hpp"
#include "modekacz/harness/reference.hpp"
#include "modekacz/harness/run.hpp"
#include "modekacz/harness/tables.hpp"
