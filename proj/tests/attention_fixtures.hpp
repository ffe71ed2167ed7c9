#pragma once

// Test-namespace aliases for the library case generators.

#include <algorithm>
#include <vector>

#include "helpers.hpp"

namespace osc::testing {

using osc::OracleLogit;
using osc::oracle_logit;
using osc::random_key;
using osc::random_query;

}  // namespace osc::testing
