// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace cci {

// Exit codes: 0 success, 1 usage, 2 data error, 3 backend error.
int run_cli(int argc, const char* const* argv);

}  // namespace cci
