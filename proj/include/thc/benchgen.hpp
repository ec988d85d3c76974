#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "thc/ast.hpp"
#include "thc/buffers.hpp"
#include "thc/divergence.hpp"

namespace thc {

enum class AccessMode { Direct, Indirect };
enum class DivergencePattern { None, IfId, IfIn, ForConstantIfId, ForInIfIn };

const char* to_string(AccessMode mode);
const char* to_string(DivergencePattern pattern);
AccessMode parse_access_mode(const std::string& text);
DivergencePattern parse_divergence_pattern(const std::string& text);

struct BenchSpec {
  int num_loads = 8;  // data loads; index and condition loads come on top
  int ai = 6;
  AccessMode access = AccessMode::Direct;
  std::optional<std::int64_t> irregularity;  // indirect only; unset means calibrate to the default hit rate
  DivergencePattern divergence = DivergencePattern::None;
  int divergence_degree = 0;
  std::size_t length = std::size_t{1} << 20;
  std::uint64_t seed = 0;
};

inline constexpr double kDefaultHitRate = 0.854;

void validate(const BenchSpec& spec);

/// Stable identifier, also used as the kernel name.
std::string spec_name(const BenchSpec& spec);

Kernel generate(const BenchSpec& spec);

/// Labels classify_divergence should produce for the generated kernel.
std::vector<Divergence> expected_divergence(const BenchSpec& spec);

/// Buffers for one run. `irregularity` must be resolved for indirect specs.
InputPlan bench_plan(const BenchSpec& spec, std::int64_t irregularity = 0);

/// Ablation grid: AI sweep, divergence patterns, divergence degrees and
/// hit-rate targets, each varied alone from the defaults.
struct GridEntry {
  std::string group;  // "ai", "divergence", "degree" or "hit-rate"
  BenchSpec spec;
  std::optional<double> hit_rate;
};
std::vector<GridEntry> bench_grid(std::size_t length, std::uint64_t seed);

/// Full cross product of AI, access mode and divergence configuration.
std::vector<BenchSpec> bench_sweep(std::size_t length, std::uint64_t seed);

struct IndexArray {
  std::vector<std::int32_t> values;
  std::int64_t degree = 1;
  std::uint64_t seed = 0;
};

/// ceil(n / degree) runs of `degree` consecutive indices (the last run may be
/// shorter), each starting at an offset drawn uniformly from [0, n - degree].
IndexArray generate_indices(std::size_t n, std::int64_t degree, std::uint64_t seed);

struct CacheModel {
  std::int64_t capacity_bits = 524288;
  int line_bytes = 32;
  int associativity = 1;
};

void validate(const CacheModel& model);

double simulate_cache(const std::vector<std::int32_t>& indices, const CacheModel& model = {}, int element_bytes = 4);
double simulate_cache(const IndexArray& indices, const CacheModel& model = {}, int element_bytes = 4);

struct Calibration {
  double target = 0;
  double achieved = 0;
  std::int64_t degree = 1;
  bool reachable = false;
};

inline constexpr double kCalibrationTolerance = 0.05;

Calibration calibrate(double target, const CacheModel& model, std::size_t n, std::uint64_t seed);

}  // namespace thc
