#pragma once

#include "phi4mm/config.hpp"
#include "phi4mm/error.hpp"
#include "phi4mm/hciz.hpp"
#include "phi4mm/monte_carlo.hpp"
#include "phi4mm/operators.hpp"
#include "phi4mm/partition.hpp"
#include "phi4mm/perturbation.hpp"
#include "phi4mm/principal_value.hpp"
#include "phi4mm/provenance.hpp"
#include "phi4mm/quadrature.hpp"
#include "phi4mm/report.hpp"
#include "phi4mm/spectra.hpp"
#include "phi4mm/suite.hpp"
#include "phi4mm/summation.hpp"
#include "phi4mm/weber.hpp"
