#pragma once

namespace pitchfork {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pitchfork
