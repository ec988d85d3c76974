#pragma once

#include <cstdint>

#include "thc/ast.hpp"

namespace thc {

/// Syntactic operation counts. Arithmetic counts float + - * / only, including
/// compound assignments and ++/-- evaluated in float.
struct OpCounts {
  std::uint64_t loads = 0;   // global/constant loads
  std::uint64_t stores = 0;  // global stores
  std::uint64_t arithmetic = 0;
  std::uint64_t barriers = 0;
  std::uint64_t local_loads = 0;
  std::uint64_t local_stores = 0;

  std::uint64_t memory() const { return loads + stores; }
  bool operator==(const OpCounts&) const = default;
};

OpCounts count_ops(const Kernel& kernel);

}  // namespace thc
