#pragma once

namespace casemix {

inline constexpr const char* kToolVersion = "casemix 0.1.0";

}  // namespace casemix
