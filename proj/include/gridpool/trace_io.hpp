#pragma once

// Line-delimited JSON persistence of consensus traces:
//   {"kind":"header","format_version":1,...}
//   {"kind":"round","round":1,...}       one per round
//   {"kind":"final","converged":true,...}

#include "gridpool/consensus.hpp"

#include <iosfwd>
#include <string>

namespace gridpool {

inline constexpr int kTraceFormatVersion = 1;

void write_trace(const RunTrace& trace, std::ostream& out);
void write_trace(const RunTrace& trace, const std::string& path);

/// Throws DataError on malformed input or a different format_version.
RunTrace read_trace(std::istream& in, const std::string& source = "trace");
RunTrace read_trace(const std::string& path);

}  // namespace gridpool
