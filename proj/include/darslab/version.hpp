#pragma once

namespace darslab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace darslab
