#pragma once

#include "jsde/version.hpp"

#include "jsde/config.hpp"
#include "jsde/errors.hpp"
#include "jsde/hypotheses.hpp"
#include "jsde/lab.hpp"
#include "jsde/levy_measure.hpp"
#include "jsde/modulus.hpp"
#include "jsde/noise.hpp"
#include "jsde/noise_io.hpp"
#include "jsde/parallel.hpp"
#include "jsde/quadrature.hpp"
#include "jsde/rng.hpp"
#include "jsde/run_config.hpp"
#include "jsde/sde.hpp"
#include "jsde/yw.hpp"
