#pragma once

namespace abr {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace abr
