#pragma once

// Umbrella header.

#include "devlab.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "loggas.hpp"
#include "matcore.hpp"
#include "parallel.hpp"
#include "randsrc.hpp"
#include "rates.hpp"
#include "rng.hpp"
#include "stats.hpp"
#include "varopt.hpp"
#include "version.hpp"
#include "wigner.hpp"
