#pragma once

#include <ostream>

namespace nvsim {

// Exit codes: 0 success, 2 validation error (bad flag, config key, invariant),
// 1 runtime error.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nvsim
