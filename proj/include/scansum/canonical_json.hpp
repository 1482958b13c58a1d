#pragma once

#include <string>

#include <json.hpp>

namespace scansum {

/// Rounds to 6 decimals, the precision canonical JSON prints.
double round6(double value);

/// Pretty-printed JSON with keys in sorted order and every floating-point
/// number written with exactly 6 decimals, so equal documents are
/// byte-identical.
std::string canonical_dump(const nlohmann::json& doc);

}  // namespace scansum
