#pragma once

#include "pais/core.hpp"
#include "pais/grid.hpp"
#include "pais/reference.hpp"
#include "pais/diagnostics.hpp"
#include "pais/targets.hpp"
#include "pais/kernels.hpp"
#include "pais/resamplers.hpp"
#include "pais/engine.hpp"
#include "pais/config.hpp"
#include "pais/experiments.hpp"
