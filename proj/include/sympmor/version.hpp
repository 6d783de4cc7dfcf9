#pragma once

namespace sympmor {
inline constexpr const char* kVersion = "0.1.0";
}  // namespace sympmor
