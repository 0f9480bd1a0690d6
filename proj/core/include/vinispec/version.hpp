#pragma once

#include <string_view>

namespace vinispec {

inline constexpr std::string_view kVersion = "0.1.0";

} // namespace vinispec
