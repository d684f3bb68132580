// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdio>
#include <string>

namespace acceptance {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline void report(int criterion, bool ok, const std::string& detail, double seconds) {
  std::printf("[criterion %2d] %s  %s  (%.1f s)\n", criterion, ok ? "PASS" : "FAIL",
              detail.c_str(), seconds);
  std::fflush(stdout);
}

}  // namespace acceptance
