// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/harness/cli.hpp"

int main(int argc, char** argv) { return m3i::harness::cli_main(argc, argv); }
