#pragma once

// Umbrella header: pulls in the whole toolkit.

#include "epl/analysis.hpp"
#include "epl/campaign.hpp"
#include "epl/counts.hpp"
#include "epl/errors.hpp"
#include "epl/format.hpp"
#include "epl/io.hpp"
#include "epl/parallel.hpp"
#include "epl/polcalc.hpp"
#include "epl/rng.hpp"
#include "epl/source.hpp"
#include "epl/teleport.hpp"
