#pragma once

#include "perclap/config.hpp"
#include "perclap/errors.hpp"
#include "perclap/isoperimetry.hpp"
#include "perclap/laplacian.hpp"
#include "perclap/lattice.hpp"
#include "perclap/rng.hpp"
#include "perclap/runner.hpp"
#include "perclap/spectral.hpp"
#include "perclap/symmetry.hpp"
#include "perclap/tails.hpp"
