#ifndef VULNGRAPH_JSON_UTIL_HPP
#define VULNGRAPH_JSON_UTIL_HPP

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "vulngraph/errors.hpp"

namespace vulngraph::jsonutil {

/// Throws InputError if `doc` is not an object or carries a key outside `allowed`.
inline void require_keys(const nlohmann::json& doc, std::string_view where,
                         std::initializer_list<std::string_view> allowed) {
    if (!doc.is_object()) {
        throw InputError(std::string(where) + ": expected an object");
    }
    for (const auto& [key, value] : doc.items()) {
        bool known = false;
        for (const std::string_view a : allowed) {
            known = known || key == a;
        }
        if (!known) {
            throw InputError(std::string(where) + ": unknown key '" + key + "'");
        }
    }
}

/// Reads `doc[key]` into `out` when present; type errors become InputError.
template <class T>
void read(const nlohmann::json& doc, std::string_view where, const char* key, T& out) {
    const auto it = doc.find(key);
    if (it == doc.end()) {
        return;
    }
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!it->is_boolean()) {
                throw InputError("");
            }
        } else if constexpr (std::is_integral_v<T>) {
            if (!it->is_number_integer()) {
                throw InputError("");
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!it->is_number()) {
                throw InputError("");
            }
        }
        out = it->get<T>();
    } catch (const std::exception&) {
        throw InputError(std::string(where) + "." + key + ": wrong type (" + it->dump() + ")");
    }
}

} // namespace vulngraph::jsonutil

#endif // VULNGRAPH_JSON_UTIL_HPP
