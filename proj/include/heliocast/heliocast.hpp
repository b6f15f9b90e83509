#pragma once

#include "heliocast/analysis.hpp"
#include "heliocast/dataset.hpp"
#include "heliocast/error.hpp"
#include "heliocast/harness.hpp"
#include "heliocast/linear_models.hpp"
#include "heliocast/metrics.hpp"
#include "heliocast/model.hpp"
#include "heliocast/neighbors.hpp"
#include "heliocast/svr.hpp"
#include "heliocast/trees.hpp"
