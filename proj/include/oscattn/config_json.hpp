#pragma once

#include <json.hpp>

namespace osc {

/// Copies the entries of `j` over `defaults`. Unknown keys, type changes and
/// negative values for unsigned defaults throw ParameterError tagged `what`.
nlohmann::json overlay_config(const nlohmann::json& defaults, const nlohmann::json& j, const char* what);

}  // namespace osc
