#pragma once

namespace styleshift {

inline constexpr const char* kEngineVersion = "styleshift 0.1.0";

}  // namespace styleshift
