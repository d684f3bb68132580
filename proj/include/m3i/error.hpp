// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace m3i {

// Base class for all library errors. Subclasses name the failed contract.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define M3I_DEFINE_ERROR(Name)                                   \
  class Name : public ::m3i::Error {                             \
   public:                                                       \
    explicit Name(const std::string& what)                       \
        : ::m3i::Error(std::string(#Name) + ": " + what) {}      \
  }

M3I_DEFINE_ERROR(MissingTargetField);
M3I_DEFINE_ERROR(ShapeMismatch);
M3I_DEFINE_ERROR(GeometryOutOfBounds);
M3I_DEFINE_ERROR(GeometryMismatch);
M3I_DEFINE_ERROR(ImageTooSmall);
M3I_DEFINE_ERROR(NonPositiveSigma);
M3I_DEFINE_ERROR(NonPositiveTau);
M3I_DEFINE_ERROR(EmptyCandidateSet);
M3I_DEFINE_ERROR(StructureMismatch);
M3I_DEFINE_ERROR(KindMismatch);
M3I_DEFINE_ERROR(UnknownMethod);
M3I_DEFINE_ERROR(SamePairedSample);
M3I_DEFINE_ERROR(PartitionViolation);
M3I_DEFINE_ERROR(OptimizationBudgetExceeded);
M3I_DEFINE_ERROR(NaNLoss);
M3I_DEFINE_ERROR(ConfigInvalid);
M3I_DEFINE_ERROR(IncompatibleCheckpoint);
M3I_DEFINE_ERROR(MalformedLog);
M3I_DEFINE_ERROR(DiskWriteError);

#undef M3I_DEFINE_ERROR

inline void require(bool cond, const char* msg) {
  if (!cond) throw Error(msg);
}

}  // namespace m3i
