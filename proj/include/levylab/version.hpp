#pragma once

namespace levylab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace levylab
