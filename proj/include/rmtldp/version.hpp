#pragma once

namespace rmtldp {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kOutputSchema = 1;

}  // namespace rmtldp
