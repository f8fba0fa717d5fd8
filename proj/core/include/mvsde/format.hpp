// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace mvsde {

/// Decimal rendering with 17 significant digits, '.' separator, independent
/// of the global locale. Used for every CSV the toolkit writes.
std::string format_double(double value);

}  // namespace mvsde
