#pragma once

// Filter/splitter/dehydrator stream-processing toolkit: composable stages
// over a simulated or wall clock, a versioned shared state store, and a
// geo-matching reference pipeline with a deterministic replay harness.

#include "fsd/clock.hpp"
#include "fsd/dehydrator.hpp"
#include "fsd/engine.hpp"
#include "fsd/envelope.hpp"
#include "fsd/errors.hpp"
#include "fsd/filter.hpp"
#include "fsd/geo.hpp"
#include "fsd/geomatch.hpp"
#include "fsd/harness/bench.hpp"
#include "fsd/harness/config.hpp"
#include "fsd/harness/metrics.hpp"
#include "fsd/harness/oracle.hpp"
#include "fsd/harness/reference_pipeline.hpp"
#include "fsd/harness/replay.hpp"
#include "fsd/harness/scenario.hpp"
#include "fsd/harness/scenario_gen.hpp"
#include "fsd/rtree.hpp"
#include "fsd/splitter.hpp"
#include "fsd/state_store.hpp"
#include "fsd/topology.hpp"
