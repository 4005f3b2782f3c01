#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace beliefcast {

/// Runs one subcommand. Results go to `out`; failures are reported on `err`
/// as a single JSON line {"error": kind, "message": text} with a nonzero
/// return value.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

}  // namespace beliefcast
