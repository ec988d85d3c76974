#pragma once

#include <optional>
#include <string>

#include "thc/ast.hpp"

namespace thc {

enum class CoarsenKind { Consecutive, Gapped };
enum class TailPolicy { RequireDivisible, GuardTails };

const char* to_string(CoarsenKind kind);
const char* to_string(TailPolicy policy);

struct CoarsenConfig {
  CoarsenKind kind = CoarsenKind::Consecutive;
  int degree = 1;
  /// Int parameter holding the problem size N. Required for gapped.
  std::optional<std::string> extent_param;
  TailPolicy tail_policy = TailPolicy::RequireDivisible;
};

/// Merges `degree` work-items into one. The result must be launched with
/// global and local sizes divided by the degree.
///
/// Two kernel shapes are accepted: a single top-level grid-stride loop
///   for (int i = get_global_id(0)[*a]; i < E; i += get_global_size(0)[*a]) { ... }
/// whose body is the per-item work, or a loop-free body indexed by
/// get_global_id(0) directly. Degree 1 returns the kernel unchanged.
/// Under RequireDivisible the emitted kernel carries a `requires:` note.
Kernel coarsen(const Kernel& kernel, const CoarsenConfig& config);

/// Sets num_simd_work_items. Throws Transform if any if-condition depends on a
/// work-item id.
Kernel emit_simd(const Kernel& kernel, int lanes);

/// Sets num_compute_units; 1 removes the attribute.
Kernel emit_replication(const Kernel& kernel, int units);

}  // namespace thc
