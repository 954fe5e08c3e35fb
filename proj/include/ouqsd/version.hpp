#pragma once

namespace ouqsd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ouqsd
