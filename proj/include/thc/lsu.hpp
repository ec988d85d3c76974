#pragma once

// Predicts the load-store units an OpenCL-to-FPGA offline compiler builds for
// each global pointer. This is a rule-based model, not ground truth.

#include <cstdint>
#include <string>
#include <vector>

#include "thc/ast.hpp"
#include "thc/divergence.hpp"

namespace thc {

inline constexpr const char* kLsuModelVersion = "thc-lsu-1";

enum class IndexClass { ContiguousAffine, StridedAffine, LaneClustered, DataDependent };
enum class LsuKind { BurstCoalesced, Prefetching };

const char* to_string(IndexClass c);
const char* to_string(LsuKind k);

/// One syntactic global access.
struct AccessPattern {
  std::string pointer;
  bool is_store = false;
  IndexClass index_class = IndexClass::ContiguousAffine;
  Divergence divergence = Divergence::None;
  std::string index;  // printed index expression
};

struct LsuEntry {
  std::string pointer;
  bool is_store = false;
  LsuKind kind = LsuKind::BurstCoalesced;
  int count = 1;
  int width_bits = 32;
  bool cached = false;
  std::int64_t cache_bits = 0;  // 0 when uncached

  bool operator==(const LsuEntry&) const = default;
};

struct LsuModel {
  std::int64_t cache_bits = 524288;  // 512 kilobits
  int max_width_bits = 512;
};

struct LsuReport {
  std::string kernel;
  std::vector<AccessPattern> accesses;  // source order
  std::vector<LsuEntry> lsus;           // sorted by pointer, loads before stores
};

LsuReport analyze(const Kernel& kernel, const LsuModel& model = {});

/// `{model_version, kernel, lsus: [...]}`, two-space indented, trailing newline.
std::string to_json(const LsuReport& report);

}  // namespace thc
