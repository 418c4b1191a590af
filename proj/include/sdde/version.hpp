#pragma once

namespace sdde {

inline constexpr const char* kLibraryName = "sddesim";
inline constexpr const char* kLibraryVersion = "1.0.0";

/// Bumped whenever a CSV column order or JSON layout changes.
inline constexpr int kSchemaVersion = 1;

}  // namespace sdde
