// SPDX-License-Identifier: Apache-2.0
#include "mvsde/format.hpp"

#include <array>
#include <charconv>

namespace mvsde {

std::string format_double(double value) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                   std::chars_format::general, 17);
    return std::string(buf.data(), ec == std::errc{} ? ptr : buf.data());
}

}  // namespace mvsde
