#pragma once

namespace wqoe {

/// Entry point behind the wqoe binary. Exit codes: 0 success, 1 usage
/// error, 2 data error, 3 numeric failure.
int run_cli(int argc, const char* const* argv);

}  // namespace wqoe
