#pragma once

// Everything in one include.

#include "levylab/csv.hpp"
#include "levylab/diagnostics.hpp"
#include "levylab/embedding.hpp"
#include "levylab/environment.hpp"
#include "levylab/errors.hpp"
#include "levylab/euler.hpp"
#include "levylab/expr.hpp"
#include "levylab/json_io.hpp"
#include "levylab/measure.hpp"
#include "levylab/operator.hpp"
#include "levylab/parallel.hpp"
#include "levylab/potential.hpp"
#include "levylab/quadrature.hpp"
#include "levylab/rng.hpp"
#include "levylab/simulation.hpp"
#include "levylab/stable.hpp"
#include "levylab/state.hpp"
#include "levylab/triplet.hpp"
#include "levylab/version.hpp"
