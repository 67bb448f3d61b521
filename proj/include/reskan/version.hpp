#pragma once

namespace reskan {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace reskan
