#include "oscattn/config_json.hpp"

#include <string>

#include "oscattn/core.hpp"

namespace osc {

nlohmann::json overlay_config(const nlohmann::json& defaults, const nlohmann::json& j, const char* what) {
  if (!j.is_object()) throw ParameterError(std::string(what) + ": expected a JSON object");
  nlohmann::json base = defaults;
  for (const auto& [key, value] : j.items()) {
    if (!base.contains(key)) throw ParameterError(std::string(what) + ": unknown key '" + key + "'");
    const auto& cur = base[key];
    const bool ok = (cur.is_number() && value.is_number()) || (cur.is_array() && value.is_array()) ||
                    (cur.is_string() && value.is_string()) || (cur.is_boolean() && value.is_boolean());
    if (!ok) throw ParameterError(std::string(what) + ": wrong type for '" + key + "'");
    if (cur.is_number_unsigned() && !(value.is_number_unsigned() || (value.is_number_integer() && value >= 0))) {
      throw ParameterError(std::string(what) + ": '" + key + "' must be a non-negative integer");
    }
    base[key] = value;
  }
  return base;
}

}  // namespace osc
