#pragma once

#include <cstdint>

namespace geosmooth::cli {

/// Checks the library against independent reference computations. Returns the number of failed checks.
int run_selftest(std::uint64_t seed);

}  // namespace geosmooth::cli
