#pragma once

#include "fluxlattice/analytics.hpp"
#include "fluxlattice/band.hpp"
#include "fluxlattice/dynamics.hpp"
#include "fluxlattice/error.hpp"
#include "fluxlattice/model.hpp"
#include "fluxlattice/scattering.hpp"
