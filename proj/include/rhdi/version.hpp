#pragma once

namespace rhdi {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rhdi
