// SPDX-License-Identifier: Apache-2.0
#include "cci/cli.hpp"

int main(int argc, char** argv) { return cci::run_cli(argc, argv); }
