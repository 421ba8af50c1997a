#pragma once

namespace dphase {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dphase
