#pragma once

// Umbrella header.

#include "folab/core.hpp"
#include "folab/linalg.hpp"
#include "folab/parallel.hpp"
#include "folab/series.hpp"
#include "folab/quadrature.hpp"
#include "folab/operator.hpp"
#include "folab/builders.hpp"
#include "folab/symbol.hpp"
#include "folab/geometry.hpp"
#include "folab/spectra.hpp"
#include "folab/asymptotics.hpp"
#include "folab/propagator.hpp"
#include "folab/dirac4d.hpp"
#include "folab/verify.hpp"
#include "folab/experiment.hpp"
