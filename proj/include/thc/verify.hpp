#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "thc/buffers.hpp"
#include "thc/error.hpp"
#include "thc/interp.hpp"

namespace thc {

/// Throws Precondition when a `requires: EXPR` note of the kernel evaluates to
/// zero for the given scalar arguments.
void check_obligations(const Kernel& kernel, const BufferSet& inputs);

struct Mismatch {
  std::string buffer;
  std::size_t index = 0;
  std::string expected;
  std::string actual;
  std::optional<std::uint32_t> original_writer;     // global id in the original launch
  std::optional<std::uint32_t> transformed_writer;  // global id in the coarsened launch
};

struct TrialResult {
  enum class Status { Match, Mismatch, Error } status = Status::Match;
  std::optional<Mismatch> mismatch;
  std::string error;  // Status::Error: which side failed and why
  std::optional<ErrorKind> error_kind;
  ExecStats original_stats;
  ExecStats transformed_stats;
};

const char* to_string(TrialResult::Status status);

/// Runs `original` over G work-items and `transformed` over G/degree work-items
/// (local size divided likewise) on the same inputs and compares every global
/// buffer bit for bit.
TrialResult compare_runs(const Program& original, const Program& transformed, std::size_t global_size,
                         std::size_t local_size, int degree, const BufferSet& inputs);

/// As compare_runs, against an already computed run of the original kernel.
TrialResult compare_against(const ExecResult& expected, const Program& transformed, std::size_t global_size,
                            std::size_t local_size, int degree, const BufferSet& inputs);

}  // namespace thc
