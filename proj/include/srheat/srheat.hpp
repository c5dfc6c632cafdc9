#pragma once

#include "srheat/softfloat/format.hpp"
#include "srheat/softfloat/rng.hpp"
#include "srheat/softfloat/rounding.hpp"

#include "srheat/heat/eigen.hpp"
#include "srheat/heat/grid.hpp"
#include "srheat/heat/laplacian.hpp"
#include "srheat/heat/problem.hpp"

#include "srheat/stepper/linear_solvers.hpp"
#include "srheat/stepper/scheme.hpp"
#include "srheat/stepper/stepper.hpp"

#include "srheat/analysis/bounds.hpp"
#include "srheat/analysis/errors.hpp"
#include "srheat/analysis/montecarlo.hpp"
#include "srheat/analysis/rates.hpp"
#include "srheat/analysis/reference.hpp"

#include "srheat/cli/config.hpp"
#include "srheat/cli/csv.hpp"
#include "srheat/cli/experiment.hpp"
