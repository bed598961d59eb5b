#include "ait/canonical.hpp"

#include <cmath>

#include "ait/error.hpp"

namespace ait {

bool all_finite(const Json& j) {
  switch (j.type()) {
    case Json::value_t::number_float:
      return std::isfinite(j.get<double>());
    case Json::value_t::object:
    case Json::value_t::array:
      for (const auto& v : j)
        if (!all_finite(v)) return false;
      return true;
    case Json::value_t::binary:
    case Json::value_t::discarded:
      return false;
    default:
      return true;
  }
}

std::string canonical(const Json& j) {
  if (!all_finite(j)) throw EncodeError("value is not serializable (non-finite number or binary)");
  try {
    return j.dump();
  } catch (const Json::type_error& e) {
    throw EncodeError(e.what());
  }
}

}  // namespace ait
