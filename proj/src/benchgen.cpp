#include "thc/benchgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "thc/error.hpp"
#include "thc/parser.hpp"

namespace thc {

namespace {

constexpr int kAiValues[] = {1, 4, 6, 10};
constexpr char kOps[] = {'+', '-', '*', '/'};

int condition_loads(const BenchSpec& s) {
  switch (s.divergence) {
    case DivergencePattern::IfIn: return s.divergence_degree == 4 ? 2 : 1;
    case DivergencePattern::ForInIfIn: return 2;
    default: return 0;
  }
}

int total_loads(const BenchSpec& s) {
  return s.num_loads + condition_loads(s) + (s.access == AccessMode::Indirect ? 1 : 0);
}

int branch_paths(const BenchSpec& s) {
  if (s.divergence == DivergencePattern::None) return 0;
  return s.divergence_degree == 0 ? 1 : s.divergence_degree;
}

class Writer {
 public:
  explicit Writer(const BenchSpec& spec) : s_(spec), rng_(spec.seed) {}

  std::string run() {
    const int nd = s_.num_loads;
    const int arith = s_.ai * (total_loads(s_) + 1);
    const int paths = branch_paths(s_);
    const int per_path = paths == 0 ? 0 : std::clamp((arith - (nd - 1)) / paths, 1, 3);
    const int chain = arith - paths * per_path;

    out_ << "__kernel void " << spec_name(s_) << "(";
    for (int i = 0; i < nd; ++i) out_ << "__global float* in" << i << ", ";
    if (s_.access == AccessMode::Indirect) out_ << "__global int* index, ";
    for (int i = 0; i < condition_loads(s_); ++i) out_ << "__global int* input" << i << ", ";
    out_ << "int N, __global float* out0) {\n";
    out_ << "  for (int gid = get_global_id(0); gid < N; gid += get_global_size(0)) {\n";
    const char* at = "gid";
    if (s_.access == AccessMode::Indirect) {
      out_ << "    int idx = index[gid];\n";
      at = "idx";
    }
    for (int i = 0; i < nd; ++i) out_ << "    float r" << i << " = in" << (nd - 1 - i) << "[" << at << "];\n";

    std::vector<int> pending;
    for (int i = 0; i + 1 < nd; ++i) pending.push_back(i);
    std::shuffle(pending.begin(), pending.end(), rng_);
    int last = nd - 1;
    for (int i = 0; i < chain; ++i) {
      const int operand = static_cast<std::size_t>(i) < pending.size() ? pending[i] : pick_below(last);
      out_ << "    float r" << nd + i << " = r" << last << " " << op() << " r" << operand << ";\n";
      last = nd + i;
    }
    result_ = "r" + std::to_string(last);

    switch (s_.divergence) {
      case DivergencePattern::None: break;
      case DivergencePattern::IfId:
        branch("    ", "get_global_id(0) % 2 == 0", per_path);
        break;
      case DivergencePattern::IfIn:
        if_in(per_path);
        break;
      case DivergencePattern::ForConstantIfId:
        out_ << "    for (int i0 = 0; i0 < 5; i0++) {\n";
        branch("      ", "get_global_id(0) % 2 == 0", per_path);
        out_ << "    }\n";
        break;
      case DivergencePattern::ForInIfIn:
        out_ << "    for (int i0 = 0; i0 < input1[get_global_id(0)] % 5; i0++) {\n";
        branch("      ", "input0[get_global_id(0)] % 2 == 0", per_path);
        out_ << "    }\n";
        break;
    }
    out_ << "    out0[gid] = " << result_ << ";\n  }\n}\n";
    return out_.str();
  }

 private:
  int pick_below(int n) { return n <= 0 ? 0 : static_cast<int>(uniform_below(rng_, static_cast<std::uint64_t>(n))); }
  char op() { return kOps[uniform_below(rng_, 4)]; }

  void ops(const std::string& indent, int count) {
    for (int i = 0; i < count; ++i) {
      out_ << indent << result_ << " = " << result_ << " " << op() << " r" << pick_below(s_.num_loads) << ";\n";
    }
  }

  void branch(const std::string& indent, const std::string& cond, int per_path) {
    out_ << indent << "if (" << cond << ") {\n";
    ops(indent + "  ", per_path);
    out_ << indent << "}\n";
  }

  void if_in(int per_path) {
    if (s_.divergence_degree == 4) {
      out_ << "    int sel = input0[get_global_id(0)] % 2 + 2 * (input1[get_global_id(0)] % 2);\n";
      for (int p = 0; p < 4; ++p) {
        if (p == 0) out_ << "    if (sel == 0) {\n";
        else if (p < 3) out_ << "    } else if (sel == " << p << ") {\n";
        else out_ << "    } else {\n";
        ops("      ", per_path);
      }
      out_ << "    }\n";
      return;
    }
    out_ << "    if (input0[get_global_id(0)] % 2 == 0) {\n";
    ops("      ", per_path);
    if (s_.divergence_degree == 2) {
      out_ << "    } else {\n";
      ops("      ", per_path);
    }
    out_ << "    }\n";
  }

  const BenchSpec& s_;
  std::mt19937_64 rng_;
  std::ostringstream out_;
  std::string result_;
};

std::string ident(const char* text) {
  std::string s = text;
  for (char& c : s) {
    if (c == '-' || c == '+') c = '_';
  }
  return s;
}

}  // namespace

const char* to_string(AccessMode mode) { return mode == AccessMode::Direct ? "direct" : "indirect"; }

const char* to_string(DivergencePattern pattern) {
  switch (pattern) {
    case DivergencePattern::None: return "none";
    case DivergencePattern::IfId: return "if-id";
    case DivergencePattern::IfIn: return "if-in";
    case DivergencePattern::ForConstantIfId: return "for-constant+if-id";
    case DivergencePattern::ForInIfIn: return "for-in+if-in";
  }
  return "?";
}

AccessMode parse_access_mode(const std::string& text) {
  if (text == "direct") return AccessMode::Direct;
  if (text == "indirect") return AccessMode::Indirect;
  throw Error(ErrorKind::InvalidSpec, "unknown access mode '" + text + "'");
}

DivergencePattern parse_divergence_pattern(const std::string& text) {
  for (auto p : {DivergencePattern::None, DivergencePattern::IfId, DivergencePattern::IfIn,
                 DivergencePattern::ForConstantIfId, DivergencePattern::ForInIfIn}) {
    if (text == to_string(p)) return p;
  }
  throw Error(ErrorKind::InvalidSpec, "unknown divergence pattern '" + text + "'");
}

void validate(const BenchSpec& s) {
  if (s.num_loads < 1) throw Error(ErrorKind::InvalidSpec, "num-loads must be positive");
  if (std::find(std::begin(kAiValues), std::end(kAiValues), s.ai) == std::end(kAiValues)) {
    throw Error(ErrorKind::InvalidSpec, "arithmetic intensity must be one of 1, 4, 6, 10");
  }
  if (s.divergence_degree != 0 && s.divergence_degree != 2 && s.divergence_degree != 4) {
    throw Error(ErrorKind::InvalidSpec, "divergence degree must be 0, 2 or 4");
  }
  if (s.divergence_degree != 0 && s.divergence != DivergencePattern::IfIn) {
    throw Error(ErrorKind::InvalidSpec, "divergence degree requires the if-in pattern");
  }
  if (s.length < 1 || s.length > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
    throw Error(ErrorKind::InvalidSpec, "array length must lie in [1, 2^31)");
  }
  if (s.irregularity) {
    if (s.access != AccessMode::Indirect) {
      throw Error(ErrorKind::InvalidSpec, "irregularity degree applies to indirect access only");
    }
    if (*s.irregularity < 1 || static_cast<std::size_t>(*s.irregularity) > s.length) {
      throw Error(ErrorKind::InvalidSpec, "irregularity degree must lie in [1, N]");
    }
  }
}

std::string spec_name(const BenchSpec& s) {
  std::string name = "mb_ai" + std::to_string(s.ai) + "_" + to_string(s.access) + "_" + ident(to_string(s.divergence));
  if (s.divergence_degree != 0) name += "_deg" + std::to_string(s.divergence_degree);
  if (s.num_loads != 8) name += "_l" + std::to_string(s.num_loads);
  return name;
}

Kernel generate(const BenchSpec& spec) {
  validate(spec);
  return parse(Writer(spec).run());
}

std::vector<Divergence> expected_divergence(const BenchSpec& spec) {
  std::vector<Divergence> labels{Divergence::Direct};
  switch (spec.divergence) {
    case DivergencePattern::None: break;
    case DivergencePattern::IfId: labels.push_back(Divergence::Direct); break;
    case DivergencePattern::IfIn:
      labels.insert(labels.end(), spec.divergence_degree == 4 ? 3 : 1, Divergence::Indirect);
      break;
    case DivergencePattern::ForConstantIfId:
      labels.push_back(Divergence::None);
      labels.push_back(Divergence::Direct);
      break;
    case DivergencePattern::ForInIfIn:
      labels.push_back(Divergence::Indirect);
      labels.push_back(Divergence::Indirect);
      break;
  }
  return labels;
}

InputPlan bench_plan(const BenchSpec& spec, std::int64_t irregularity) {
  validate(spec);
  const std::int64_t degree = spec.irregularity.value_or(irregularity);
  if (spec.access == AccessMode::Indirect && (degree < 1 || static_cast<std::size_t>(degree) > spec.length)) {
    throw Error(ErrorKind::InvalidSpec, "indirect access needs an irregularity degree in [1, N]");
  }
  InputPlan plan;
  plan.length = spec.length;
  std::uint64_t stream = 0;
  auto add = [&](const std::string& name, ScalarType type, FillSpec fill) {
    fill.seed = derive_seed(spec.seed, stream++);
    plan.types[name] = type;
    plan.fills[name] = fill;
  };
  for (int i = 0; i < spec.num_loads; ++i) add("in" + std::to_string(i), ScalarType::Float, {FillKind::UniformFloat});
  if (spec.access == AccessMode::Indirect) {
    FillSpec f{FillKind::Indices};
    f.degree = degree;
    add("index", ScalarType::Int, f);
  }
  for (int i = 0; i < condition_loads(spec); ++i) {
    FillSpec f{FillKind::UniformInt};
    f.bound = static_cast<std::int64_t>(spec.length);
    add("input" + std::to_string(i), ScalarType::Int, f);
  }
  add("out0", ScalarType::Float, {FillKind::Zeros});
  plan.scalars["N"] = ScalarValue::of_int(static_cast<std::int32_t>(spec.length));
  return plan;
}

std::vector<GridEntry> bench_grid(std::size_t length, std::uint64_t seed) {
  BenchSpec base;
  base.length = length;
  base.seed = seed;
  std::vector<GridEntry> grid;
  for (int ai : kAiValues) {
    BenchSpec s = base;
    s.ai = ai;
    grid.push_back({"ai", s, std::nullopt});
  }
  for (auto p : {DivergencePattern::IfId, DivergencePattern::IfIn, DivergencePattern::ForConstantIfId,
                 DivergencePattern::ForInIfIn}) {
    BenchSpec s = base;
    s.divergence = p;
    grid.push_back({"divergence", s, std::nullopt});
  }
  for (int d : {0, 2, 4}) {
    BenchSpec s = base;
    s.divergence = DivergencePattern::IfIn;
    s.divergence_degree = d;
    grid.push_back({"degree", s, std::nullopt});
  }
  for (double h : {0.0, 0.4, 0.6, 0.7, 0.8, 0.9}) {
    BenchSpec s = base;
    s.access = AccessMode::Indirect;
    grid.push_back({"hit-rate", s, h});
  }
  return grid;
}

std::vector<BenchSpec> bench_sweep(std::size_t length, std::uint64_t seed) {
  const std::pair<DivergencePattern, int> configs[] = {
      {DivergencePattern::None, 0},           {DivergencePattern::IfId, 0},
      {DivergencePattern::IfIn, 0},           {DivergencePattern::IfIn, 2},
      {DivergencePattern::IfIn, 4},           {DivergencePattern::ForConstantIfId, 0},
      {DivergencePattern::ForInIfIn, 0},
  };
  std::vector<BenchSpec> out;
  for (int ai : kAiValues) {
    for (auto mode : {AccessMode::Direct, AccessMode::Indirect}) {
      for (const auto& [pattern, degree] : configs) {
        BenchSpec s;
        s.ai = ai;
        s.access = mode;
        s.divergence = pattern;
        s.divergence_degree = degree;
        s.length = length;
        s.seed = seed;
        out.push_back(s);
      }
    }
  }
  return out;
}

IndexArray generate_indices(std::size_t n, std::int64_t degree, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::InvalidSpec, "index array length must be positive");
  if (degree < 1 || static_cast<std::uint64_t>(degree) > n) {
    throw Error(ErrorKind::InvalidSpec, "irregularity degree must lie in [1, N]");
  }
  const auto d = static_cast<std::size_t>(degree);
  IndexArray out{{}, degree, seed};
  out.values.reserve(n);
  std::mt19937_64 rng(seed);
  while (out.values.size() < n) {
    const std::size_t start = uniform_below(rng, n - d + 1);
    const std::size_t len = std::min(d, n - out.values.size());
    for (std::size_t j = 0; j < len; ++j) out.values.push_back(static_cast<std::int32_t>(start + j));
  }
  return out;
}

void validate(const CacheModel& m) {
  if (m.capacity_bits <= 0 || m.line_bytes <= 0 || m.associativity <= 0) {
    throw Error(ErrorKind::InvalidSpec, "cache parameters must be positive");
  }
  if (m.capacity_bits % (8 * m.line_bytes) != 0) {
    throw Error(ErrorKind::InvalidSpec, "cache capacity must be a whole number of lines");
  }
  if ((m.capacity_bits / (8 * m.line_bytes)) % m.associativity != 0) {
    throw Error(ErrorKind::InvalidSpec, "line count must be divisible by the associativity");
  }
}

double simulate_cache(const std::vector<std::int32_t>& indices, const CacheModel& model, int element_bytes) {
  validate(model);
  if (indices.empty()) throw Error(ErrorKind::InvalidSpec, "empty access trace");
  if (element_bytes <= 0) throw Error(ErrorKind::InvalidSpec, "element size must be positive");
  const std::int64_t lines = model.capacity_bits / (8 * model.line_bytes);
  const std::int64_t sets = lines / model.associativity;
  const auto ways = static_cast<std::size_t>(model.associativity);
  // Per set, tags ordered most recently used first; -1 marks an empty way.
  std::vector<std::int64_t> tags(static_cast<std::size_t>(lines), -1);
  std::uint64_t hits = 0;
  for (std::int32_t i : indices) {
    const std::int64_t line = static_cast<std::int64_t>(i) * element_bytes / model.line_bytes;
    const auto base = static_cast<std::size_t>(line % sets) * ways;
    auto first = tags.begin() + static_cast<std::ptrdiff_t>(base);
    auto last = first + static_cast<std::ptrdiff_t>(ways);
    auto it = std::find(first, last, line);
    if (it != last) {
      ++hits;
    } else {
      it = last - 1;
    }
    std::rotate(first, it, it + 1);
    *first = line;
  }
  return static_cast<double>(hits) / static_cast<double>(indices.size());
}

double simulate_cache(const IndexArray& indices, const CacheModel& model, int element_bytes) {
  return simulate_cache(indices.values, model, element_bytes);
}

Calibration calibrate(double target, const CacheModel& model, std::size_t n, std::uint64_t seed) {
  if (!(target >= 0.0 && target <= 1.0)) throw Error(ErrorKind::InvalidSpec, "target hit rate must lie in [0, 1]");
  if (n == 0) throw Error(ErrorKind::InvalidSpec, "index array length must be positive");
  validate(model);
  std::map<std::int64_t, double> memo;
  auto rate = [&](std::int64_t d) {
    auto [it, fresh] = memo.try_emplace(d, 0.0);
    if (fresh) it->second = simulate_cache(generate_indices(n, d, seed), model);
    return it->second;
  };
  // Smallest degree whose hit rate reaches the target.
  std::int64_t lo = 1, hi = static_cast<std::int64_t>(n);
  while (lo < hi) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (rate(mid) >= target) hi = mid;
    else lo = mid + 1;
  }
  Calibration c;
  c.target = target;
  c.degree = lo;
  c.achieved = rate(lo);
  if (lo > 1 && std::abs(rate(lo - 1) - target) < std::abs(c.achieved - target)) {
    c.degree = lo - 1;
    c.achieved = rate(lo - 1);
  }
  c.reachable = std::abs(c.achieved - target) <= kCalibrationTolerance + 1e-12;
  return c;
}

}  // namespace thc
