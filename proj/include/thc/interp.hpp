#pragma once

// Deterministic reference interpreter for the kernel subset over a 1-D NDRange.
//
// Work-groups run one after another; inside a group the work-items run in
// barrier-delimited phases, ascending local id within each phase. Arithmetic
// is 32-bit: int/uint wrap, float is IEEE single with round-to-nearest-even.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "thc/ast.hpp"

namespace thc {

struct LaunchConfig {
  std::size_t global_size = 1;
  std::size_t local_size = 0;  // 0 selects min(global_size, 256)
  bool reverse_group_order = false;

  std::size_t effective_local_size() const;
  /// Throws Precondition unless the geometry is valid.
  void validate() const;
};

/// A typed 1-D array. Elements are stored as raw 32-bit patterns.
struct Buffer {
  ScalarType type = ScalarType::Float;
  std::vector<std::uint32_t> words;

  static Buffer zeros(ScalarType type, std::size_t length);
  static Buffer of_floats(std::span<const float> values);
  static Buffer of_ints(std::span<const std::int32_t> values);
  static Buffer of_uints(std::span<const std::uint32_t> values);

  std::size_t size() const { return words.size(); }
  float as_float(std::size_t i) const;
  std::int32_t as_int(std::size_t i) const;
  /// Element rendered in its own type, for reports.
  std::string element_text(std::size_t i) const;

  bool operator==(const Buffer&) const = default;  // bit-exact
};

struct ScalarValue {
  ScalarType type = ScalarType::Int;
  std::uint32_t bits = 0;

  static ScalarValue of_int(std::int32_t v);
  static ScalarValue of_uint(std::uint32_t v);
  static ScalarValue of_float(float v);
  bool operator==(const ScalarValue&) const = default;
};

struct BufferSet {
  std::map<std::string, Buffer> buffers;        // global/constant pointer params
  std::map<std::string, ScalarValue> scalars;   // scalar params
  std::map<std::string, std::size_t> local_lengths;  // __local pointer params

  bool operator==(const BufferSet&) const = default;
};

struct ExecStats {
  std::uint64_t loads = 0;       // global/constant loads
  std::uint64_t stores = 0;      // global stores
  std::uint64_t arithmetic = 0;  // floating-point + - * /
  std::uint64_t barriers = 0;    // barrier crossings summed over work-items
  std::uint64_t local_loads = 0;
  std::uint64_t local_stores = 0;

  bool operator==(const ExecStats&) const = default;
};

struct ExecResult {
  BufferSet memory;
  ExecStats stats;
  /// For each written global buffer: 1 + global id of the last writer per element, 0 if untouched.
  std::map<std::string, std::vector<std::uint32_t>> writers;
};

/// A kernel lowered once to bytecode; run() may be called many times and from
/// several threads at once.
class Program {
 public:
  explicit Program(const Kernel& kernel);
  ~Program();
  Program(Program&&) noexcept;
  Program& operator=(Program&&) noexcept;

  ExecResult run(const LaunchConfig& launch, BufferSet memory) const;

  const Kernel& kernel() const;
  std::size_t instruction_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

ExecResult interpret(const Kernel& kernel, const LaunchConfig& launch, BufferSet memory);

}  // namespace thc
