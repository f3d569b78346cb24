#pragma once

#include <iosfwd>

namespace dissnet::cli {

/// Exit codes: 0 certified/feasible/decayed, 2 not certified/infeasible, 1 error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dissnet::cli
