#pragma once

#include <random>

namespace vmg {

/// Engine used everywhere a seed must fully determine the result.
using Rng = std::mt19937_64;

}  // namespace vmg
