#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hcsg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

/// Subcommands gen, train, eval, ablate, gradcheck, replay. Returns 0 on
/// success, 1 on a configuration error (bad flags, unreadable inputs), 2 on a
/// runtime failure.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

}  // namespace hcsg
