#pragma once

#include "sublin/errors.hpp"
#include "sublin/lattice.hpp"
#include "sublin/gexpect.hpp"
#include "sublin/path_functional.hpp"
#include "sublin/inequalities.hpp"
#include "sublin/moduli.hpp"
#include "sublin/gbsde.hpp"
#include "sublin/rgbsde.hpp"
#include "sublin/scenarios.hpp"
