#pragma once

// Convenience include for the whole library.

#include "aictrl/aic.hpp"
#include "aictrl/config.hpp"
#include "aictrl/free_energy.hpp"
#include "aictrl/harness.hpp"
#include "aictrl/io.hpp"
#include "aictrl/plants.hpp"
#include "aictrl/rng.hpp"
#include "aictrl/types.hpp"
#include "aictrl/uaic.hpp"
