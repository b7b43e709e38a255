#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"
#include "xmd/error.hpp"

namespace xmd {

using json = nlohmann::json;

/// Reads j[key] into out when present; type mismatches become ConfigError.
template <class T>
void read_field(const json& j, std::string_view key, T& out, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + std::string(key) + ": " + e.what());
  }
}

/// ConfigError naming the first key of object j not in `known`.
inline void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown configuration key: " + where + "." + key);
  }
}

}  // namespace xmd
