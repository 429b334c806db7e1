#pragma once

// Umbrella header.
#include "loko/types.hpp"
#include "loko/radio.hpp"
#include "loko/peb.hpp"
#include "loko/model.hpp"
#include "loko/association.hpp"
#include "loko/convex_core.hpp"
#include "loko/routines.hpp"
#include "loko/kpi.hpp"
#include "loko/baselines.hpp"
#include "loko/scenarios.hpp"
#include "loko/io.hpp"
