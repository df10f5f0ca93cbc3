#pragma once

namespace ctxrec {

inline constexpr const char* kToolName = "ctxrec";
inline constexpr const char* kToolVersion = "1.0.0";

}  // namespace ctxrec
