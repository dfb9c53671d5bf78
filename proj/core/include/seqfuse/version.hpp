#pragma once

namespace seqfuse {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace seqfuse
