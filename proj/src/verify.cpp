#include "thc/verify.hpp"

#include "thc/error.hpp"
#include "thc/parser.hpp"

namespace thc {

const char* to_string(TrialResult::Status status) {
  switch (status) {
    case TrialResult::Status::Match: return "match";
    case TrialResult::Status::Mismatch: return "mismatch";
    case TrialResult::Status::Error: return "error";
  }
  return "?";
}

void check_obligations(const Kernel& kernel, const BufferSet& inputs) {
  static const std::string kPrefix = "requires: ";
  for (const std::string& note : kernel.notes) {
    if (note.rfind(kPrefix, 0) != 0) continue;
    const std::string condition = note.substr(kPrefix.size());
    std::string params;
    for (const Param& p : kernel.params) {
      if (p.type.pointer) continue;
      params += (p.type.scalar == ScalarType::Float ? "float " : p.type.scalar == ScalarType::Uint ? "uint " : "int ") +
                p.name + ", ";
    }
    const Kernel check = parse("__kernel void obligation(" + params + "__global int * thc_result) {\n" +
                               "    thc_result[0] = " + condition + ";\n}\n");
    BufferSet args;
    args.scalars = inputs.scalars;
    args.buffers["thc_result"] = Buffer::zeros(ScalarType::Int, 1);
    const ExecResult r = interpret(check, LaunchConfig{1}, std::move(args));
    if (r.memory.buffers.at("thc_result").words[0] == 0) {
      throw Error(ErrorKind::Precondition, "kernel obligation violated: " + condition);
    }
  }
}

namespace {

std::optional<std::uint32_t> writer_of(const ExecResult& r, const std::string& buffer, std::size_t index) {
  auto it = r.writers.find(buffer);
  if (it == r.writers.end() || it->second[index] == 0) return std::nullopt;
  return it->second[index] - 1;
}

}  // namespace

namespace {

TrialResult failed(const char* side, const Error& e) {
  TrialResult result;
  result.status = TrialResult::Status::Error;
  result.error = std::string(side) + ": " + e.what();
  result.error_kind = e.kind();
  return result;
}

}  // namespace

TrialResult compare_against(const ExecResult& expected, const Program& transformed, std::size_t global_size,
                            std::size_t local_size, int degree, const BufferSet& inputs) {
  const LaunchConfig base{global_size, local_size};
  const std::size_t l = base.effective_local_size();
  const auto c = static_cast<std::size_t>(degree);
  if (degree < 1 || global_size % c != 0 || l % c != 0) {
    throw Error(ErrorKind::Precondition, "global size " + std::to_string(global_size) + " and local size " +
                                             std::to_string(l) + " must be divisible by the degree " +
                                             std::to_string(degree));
  }
  ExecResult b;
  try {
    check_obligations(transformed.kernel(), inputs);
    b = transformed.run(LaunchConfig{global_size / c, l / c}, inputs);
  } catch (const Error& e) {
    return failed("transformed kernel", e);
  }
  TrialResult result;
  result.original_stats = expected.stats;
  result.transformed_stats = b.stats;
  for (const auto& [name, want] : expected.memory.buffers) {
    const Buffer& actual = b.memory.buffers.at(name);
    for (std::size_t i = 0; i < want.size(); ++i) {
      if (want.words[i] == actual.words[i]) continue;
      result.status = TrialResult::Status::Mismatch;
      result.mismatch = Mismatch{name, i, want.element_text(i), actual.element_text(i), writer_of(expected, name, i),
                                 writer_of(b, name, i)};
      return result;
    }
  }
  return result;
}

TrialResult compare_runs(const Program& original, const Program& transformed, std::size_t global_size,
                         std::size_t local_size, int degree, const BufferSet& inputs) {
  const LaunchConfig base{global_size, local_size};
  const std::size_t l = base.effective_local_size();
  const auto c = static_cast<std::size_t>(degree);
  if (degree < 1 || global_size % c != 0 || l % c != 0) {
    throw Error(ErrorKind::Precondition, "global size " + std::to_string(global_size) + " and local size " +
                                             std::to_string(l) + " must be divisible by the degree " +
                                             std::to_string(degree));
  }
  ExecResult a;
  try {
    a = original.run(base, inputs);
  } catch (const Error& e) {
    return failed("original kernel", e);
  }
  return compare_against(a, transformed, global_size, local_size, degree, inputs);
}

}  // namespace thc
