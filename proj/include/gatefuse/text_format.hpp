// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

namespace gatefuse {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double x);

/// Strict parse of a whole token; throws std::invalid_argument.
double parse_double(std::string_view token);
long parse_long(std::string_view token);

}  // namespace gatefuse
