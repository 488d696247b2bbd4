#pragma once

namespace kikuchi {

inline constexpr const char* kVersion = "0.1.0";

} // namespace kikuchi
