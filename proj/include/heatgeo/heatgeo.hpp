#pragma once

#include "heatgeo/core.hpp"
#include "heatgeo/datasets.hpp"
#include "heatgeo/distance.hpp"
#include "heatgeo/graph.hpp"
#include "heatgeo/heat.hpp"
#include "heatgeo/io.hpp"
#include "heatgeo/kneedle.hpp"
#include "heatgeo/mds.hpp"
#include "heatgeo/metrics.hpp"
#include "heatgeo/pipeline.hpp"
#include "heatgeo/rng.hpp"
