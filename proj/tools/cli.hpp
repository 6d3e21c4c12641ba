#pragma once

#include <ostream>

namespace mdpgeo::cli {

// sysexits-style codes.
inline constexpr int kOk = 0;
inline constexpr int kIterationCap = 2;
inline constexpr int kUsage = 64;
inline constexpr int kDataError = 65;
inline constexpr int kNoInput = 66;
inline constexpr int kSoftware = 70;
inline constexpr int kCantCreate = 73;

/// Entry point of the mdpgeo tool. Flags also come from MDPGEO_<FLAG>
/// environment variables; the command line wins. Failures print one line
///   error kind=<kind> exit=<code> msg="<text>"
/// on `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mdpgeo::cli
