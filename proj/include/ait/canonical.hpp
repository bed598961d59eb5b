#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace ait {

using Json = nlohmann::json;

/// Canonical text form: UTF-8, object keys sorted bytewise, no insignificant
/// whitespace. Throws EncodeError for non-finite numbers or invalid UTF-8.
std::string canonical(const Json& j);

/// True if `j` contains no NaN/Inf anywhere.
bool all_finite(const Json& j);

/// Non-negative integer, whichever signedness the parser or builder chose.
inline bool is_uint(const Json& j) {
  return j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0);
}

}  // namespace ait
