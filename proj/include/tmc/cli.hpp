#pragma once

#include <iosfwd>

namespace tmc {

// Exit codes: 0 success, 1 domain error, 2 usage error. Data goes to `out`
// (or an --out file), diagnostics to `err`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tmc
