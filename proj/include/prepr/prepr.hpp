#pragma once

// Umbrella header: prepivoted max-type two-sample mean test, baseline tests,
// population generators, Monte Carlo harness, and data loading.

#include "prepr/baselines.hpp"
#include "prepr/dataio.hpp"
#include "prepr/edgeworth.hpp"
#include "prepr/harness.hpp"
#include "prepr/moments.hpp"
#include "prepr/normal.hpp"
#include "prepr/prepivot_test.hpp"
#include "prepr/rng.hpp"
#include "prepr/sample_matrix.hpp"
#include "prepr/simgen.hpp"
