#pragma once

// Reproducible kernel inputs and the on-disk buffer container.
//
// Container: 8 bytes "THCBUF01" followed by little-endian 32-bit words. A JSON
// manifest names each buffer with its type, length and byte offset, or with the
// generator that recreates it. Layout is documented in docs/formats.md.

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>

#include "thc/ast.hpp"
#include "thc/interp.hpp"

namespace thc {

/// Uniform integer in [0, n) by rejection; n > 0.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

/// Mixes a seed with a stream number (splitmix64 finaliser).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

enum class FillKind { Zeros, UniformFloat, UniformInt, Indices };

const char* to_string(FillKind kind);

struct FillSpec {
  FillKind kind = FillKind::Zeros;
  std::uint64_t seed = 0;
  float low = 0.5f;   // UniformFloat: [low, high)
  float high = 2.0f;
  std::int64_t bound = 1;      // UniformInt: [0, bound)
  std::int64_t degree = 1;     // Indices: irregularity degree

  bool operator==(const FillSpec&) const = default;
};

Buffer generate(ScalarType type, std::size_t length, const FillSpec& fill);

/// Everything needed to rebuild a BufferSet.
struct InputPlan {
  std::size_t length = 0;
  std::map<std::string, ScalarType> types;
  std::map<std::string, FillSpec> fills;
  std::map<std::string, ScalarValue> scalars;
  std::map<std::string, std::size_t> local_lengths;

  bool operator==(const InputPlan&) const = default;
};

/// Floats in [0.5, 2), ints in [0, length), int scalars = int_scalar, float scalars = 1.
/// Each pointer parameter draws from its own seed stream.
InputPlan random_plan(const Kernel& kernel, std::size_t length, std::int32_t int_scalar, std::uint64_t seed,
                      std::size_t local_length = 1024);

BufferSet materialize(const InputPlan& plan);

/// Writes the container and its manifest. Buffers with an entry in `fills` are
/// recorded as generators instead of data. The data file path is stored
/// relative to the manifest.
void save_buffers(const BufferSet& buffers, const std::filesystem::path& manifest,
                  const std::filesystem::path& data, const std::map<std::string, FillSpec>& fills = {});

BufferSet load_buffers(const std::filesystem::path& manifest);

const char* type_name(ScalarType type);
ScalarType parse_type_name(const std::string& name);

}  // namespace thc
