#pragma once

namespace ftsim {

inline constexpr const char* kToolName = "ftsim";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

}  // namespace ftsim
