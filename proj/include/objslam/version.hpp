#pragma once

namespace objslam {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace objslam
