// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace m3i::harness {

// Entry point behind the m3i binary. Exit codes: 0 success, 2 configuration
// error, 3 numeric failure.
int cli_main(int argc, const char* const* argv);

}  // namespace m3i::harness
