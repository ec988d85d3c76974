// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "test_util.hpp"
#include "thc/benchgen.hpp"
#include "thc/coarsen.hpp"
#include "thc/counts.hpp"
#include "thc/divergence.hpp"
#include "thc/error.hpp"
#include "thc/parser.hpp"
#include "thc/verify.hpp"

using namespace thc;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void fail(const std::string& why) {
    if (pass) detail << why;
    pass = false;
  }
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

Kernel multiplication() { return parse(test::read_golden("multiplication.cl")); }

CoarsenConfig config(CoarsenKind kind, int c) { return CoarsenConfig{kind, c, std::string("N")}; }

int cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = cli::run(args, o, e);
  if (out) *out = o.str();
  return code;
}

void template_fidelity(Verdict& v) {
  const auto t0 = Clock::now();
  const Kernel cons = coarsen(multiplication(), config(CoarsenKind::Consecutive, 2));
  const Kernel gap = coarsen(multiplication(), config(CoarsenKind::Gapped, 2));
  if (cons != parse(test::read_golden("multiplication_consecutive2.cl"))) v.fail("consecutive C=2 differs from the template");
  if (gap != parse(test::read_golden("multiplication_gapped2.cl"))) v.fail("gapped C=2 differs from the template");
  const std::string text = print(gap);
  if (text.find("int gapped_length = N / 2;") == std::string::npos) v.fail("missing gapped_length = N / 2");
  for (const char* name : {"r0_0", "r0_1", "r2_1", "gid_1"}) {
    if (print(cons).find(name) == std::string::npos) v.fail(std::string("missing renamed ") + name);
  }
  const double t = seconds_since(t0);
  if (t >= 1.0) v.fail("took " + std::to_string(t) + " s");
  v.detail << "2 templates, " << t << " s";
}

void equivalence_sweep(Verdict& v) {
  const auto t0 = Clock::now();
  const std::size_t n = std::size_t{1} << 20;
  const std::size_t local = 256;
  const Calibration cal = calibrate(kDefaultHitRate, CacheModel{}, n, 0);
  int runs = 0, mismatches = 0;
  for (const BenchSpec& spec : bench_sweep(n, 0)) {
    const Kernel original = generate(spec);
    std::vector<std::pair<std::string, Program>> variants;
    for (auto kind : {CoarsenKind::Consecutive, CoarsenKind::Gapped}) {
      for (int c : {2, 4, 8}) {
        variants.emplace_back(std::string(to_string(kind)) + " C=" + std::to_string(c),
                              Program(coarsen(original, config(kind, c))));
      }
    }
    const Program p(original);
    for (std::uint64_t trial = 0; trial < 3; ++trial) {
      BenchSpec inputs_spec = spec;
      inputs_spec.seed = derive_seed(spec.seed, trial);
      const BufferSet inputs = materialize(bench_plan(inputs_spec, cal.degree));
      const ExecResult expected = p.run(LaunchConfig{n, local}, inputs);
      for (std::size_t i = 0; i < variants.size(); ++i) {
        const int c = 1 << (i % 3 + 1);
        const TrialResult r = compare_against(expected, variants[i].second, n, local, c, inputs);
        ++runs;
        if (r.status != TrialResult::Status::Match) {
          ++mismatches;
          std::string why = r.mismatch ? r.mismatch->buffer + "[" + std::to_string(r.mismatch->index) + "]" : r.error;
          v.fail(spec_name(spec) + " " + variants[i].first + " trial " + std::to_string(trial) + ": " + why + "; ");
        }
      }
    }
  }
  const double t = seconds_since(t0);
  if (runs != 56 * 6 * 3) v.fail("expected 1008 runs, got " + std::to_string(runs));
  if (t >= 600) v.fail("took " + std::to_string(t) + " s; ");
  v.detail << runs << " runs, " << mismatches << " mismatches, N=2^20, D=" << cal.degree << ", " << t << " s";
}

void partition_laws(Verdict& v) {
  const Kernel grid = parse(R"(__kernel void cover(__global int *hits, int N) {
  for (int gid = get_global_id(0); gid < N; gid += get_global_size(0)) { hits[gid] = hits[gid] + 1; }
})");
  const Kernel flat = parse(R"(__kernel void cover(__global int *hits, int N) {
  int i = get_global_id(0);
  hits[i] = hits[i] + 1;
})");
  int checks = 0;
  for (std::size_t g : {8u, 16u, 64u}) {
    for (int c : {1, 2, 4, 8}) {
      // Index formulas.
      std::vector<int> cons(g), gap(g);
      for (std::size_t id = 0; id < g / c; ++id) {
        for (int k = 0; k < c; ++k) {
          ++cons[id * c + k];
          ++gap[id + (g / c) * k];
        }
      }
      for (std::size_t i = 0; i < g; ++i) {
        if (cons[i] != 1 || gap[i] != 1) v.fail("formula coverage G=" + std::to_string(g) + " C=" + std::to_string(c));
      }
      // Emitted kernels under the interpreter.
      for (const Kernel* k : {&grid, &flat}) {
        for (auto kind : {CoarsenKind::Consecutive, CoarsenKind::Gapped}) {
          const Kernel t = coarsen(*k, config(kind, c));
          BufferSet set;
          set.buffers["hits"] = Buffer::zeros(ScalarType::Int, g);
          set.scalars["N"] = ScalarValue::of_int(static_cast<std::int32_t>(g));
          const ExecResult r = Program(t).run(LaunchConfig{g / c, g / c}, set);
          for (std::uint32_t w : r.memory.buffers.at("hits").words) {
            if (w != 1) v.fail(std::string(to_string(kind)) + " kernel coverage G=" + std::to_string(g) + " C=" + std::to_string(c));
          }
          ++checks;
        }
      }
    }
  }
  v.detail << "12 formula pairs, " << checks << " interpreted kernels";
}

void lsu_goldens(Verdict& v) {
  const fs::path dir = fs::temp_directory_path() / ("thc_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string top = test::golden_path("multiplication.cl");
  const std::string c8 = (dir / "c8.cl").string(), g8 = (dir / "g8.cl").string();
  if (cli({"coarsen", top, "--degree", "8", "-o", c8}) != 0) v.fail("coarsen C=8 failed");
  if (cli({"coarsen", top, "--kind", "gapped", "--extent", "N", "--degree", "8", "-o", g8}) != 0) v.fail("gapped C=8 failed");
  const std::pair<std::string, std::string> cases[] = {
      {top, "lsu_baseline.json"}, {c8, "lsu_consecutive8.json"}, {g8, "lsu_gapped8.json"}};
  for (const auto& [input, golden] : cases) {
    std::string out;
    if (cli({"analyze", input}, &out) != 0 || out != test::read_golden(golden)) v.fail(golden + " differs; ");
  }
  fs::remove_all(dir);
  v.detail << "3 reports byte-identical";
}

void divergence_labeling(Verdict& v) {
  const Kernel if_id = parse(R"(__kernel void k(__global float* a) {
  if (get_global_id(0) % 2 == 0) { a[get_global_id(0)] = 1.0f; }
})");
  const Kernel if_in = parse(R"(__kernel void k(__global float* a, __global int* input) {
  if (input[get_global_id(0)] % 2 == 0) { a[get_global_id(0)] = 1.0f; }
})");
  if (classify_divergence(if_id).at(0).label != Divergence::Direct) v.fail("if-id not direct");
  if (classify_divergence(if_in).at(0).label != Divergence::Indirect) v.fail("if-in not indirect");

  int kernels = 0, rejected = 0;
  auto simd_rejects = [](const Kernel& k) {
    try {
      emit_simd(k, 4);
    } catch (const Error& e) {
      return e.kind() == ErrorKind::Transform;
    }
    return false;
  };
  std::vector<std::pair<Kernel, bool>> cases{{if_id, true}, {if_in, false}, {multiplication(), false}};
  for (const BenchSpec& s : bench_sweep(1024, 0)) {
    const Kernel k = generate(s);
    const auto labels = classify_divergence(k);
    if (labels.size() != expected_divergence(s).size()) {
      v.fail(spec_name(s) + " label count; ");
      continue;
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i].label != expected_divergence(s)[i]) v.fail(spec_name(s) + " label " + std::to_string(i) + "; ");
    }
    const bool id_branch =
        s.divergence == DivergencePattern::IfId || s.divergence == DivergencePattern::ForConstantIfId;
    cases.emplace_back(k, id_branch);
  }
  for (const auto& [k, expect_reject] : cases) {
    ++kernels;
    const bool r = simd_rejects(k);
    rejected += r;
    if (r != expect_reject) v.fail(k.name + (r ? " wrongly rejected by SIMD; " : " wrongly accepted by SIMD; "));
  }
  v.detail << kernels << " kernels, " << rejected << " SIMD rejections";
}

void ai_exactness(Verdict& v) {
  std::set<int> seen;
  int kernels = 0;
  for (const BenchSpec& s : bench_sweep(64, 0)) {
    const Kernel k = generate(s);
    const OpCounts c = count_ops(k);
    ++kernels;
    seen.insert(s.ai);
    if (c.arithmetic != s.ai * c.memory()) {
      v.fail(spec_name(s) + ": " + std::to_string(c.arithmetic) + "/" + std::to_string(c.memory()) + "; ");
    }
    // Straight-line kernels: dynamic counts from the interpreter agree.
    if (s.divergence == DivergencePattern::None) {
      const ExecResult r = Program(k).run(LaunchConfig{64, 64}, materialize(bench_plan(s, 4)));
      if (r.stats.arithmetic != static_cast<std::uint64_t>(s.ai) * (r.stats.loads + r.stats.stores)) {
        v.fail(spec_name(s) + ": interpreted ratio; ");
      }
    }
  }
  if (seen != std::set<int>{1, 4, 6, 10}) v.fail("AI values not covered");
  v.detail << kernels << " kernels over AI {1,4,6,10}";
}

void cache_calibration(Verdict& v) {
  const auto t0 = Clock::now();
  const std::size_t n = std::size_t{1} << 20;
  for (double target : {0.0, 0.4, 0.6, 0.7, 0.8, 0.9, kDefaultHitRate}) {
    const Calibration c = calibrate(target, CacheModel{}, n, 0);
    v.detail << target << "->" << c.achieved << "@D=" << c.degree << " ";
    if (!c.reachable || std::abs(c.achieved - target) > 0.05) v.fail("target " + std::to_string(target) + " missed; ");
  }
  for (double target : {0.15, 0.20, 0.25}) {
    const Calibration c = calibrate(target, CacheModel{}, n, 0);
    if (c.reachable) v.fail("target " + std::to_string(target) + " reported reachable; ");
  }
  const double t = seconds_since(t0);
  if (t >= 120) v.fail("took " + std::to_string(t) + " s");
  v.detail << "unreachable 0.15/0.20/0.25, " << t << " s";
}

void round_trip_determinism(Verdict& v) {
  int kernels = 0;
  auto check = [&](const Kernel& k, const std::string& what) {
    ++kernels;
    if (parse(print(k)) != k) v.fail("round trip " + what + "; ");
  };
  for (const char* g : {"multiplication.cl", "multiplication_consecutive2.cl", "multiplication_gapped2.cl", "vector_add.cl"}) {
    check(parse(test::read_golden(g)), g);
  }
  std::vector<BenchSpec> specs = bench_sweep(4096, 0);
  for (const GridEntry& e : bench_grid(4096, 0)) specs.push_back(e.spec);
  for (const BenchSpec& s : specs) {
    const Kernel k = generate(s);
    check(k, spec_name(s));
    if (print(generate(s)) != print(k)) v.fail("nondeterministic " + spec_name(s) + "; ");
    for (auto kind : {CoarsenKind::Consecutive, CoarsenKind::Gapped}) {
      for (int c : {2, 4, 8}) {
        const Kernel t = coarsen(k, config(kind, c));
        check(t, spec_name(s) + " coarsened");
        if (print(coarsen(k, config(kind, c))) != print(t)) v.fail("nondeterministic coarsening; ");
      }
    }
    check(emit_replication(k, 2), "replicated");
  }
  check(emit_simd(multiplication(), 4), "simd");
  if (generate_indices(1 << 16, 7, 5).values != generate_indices(1 << 16, 7, 5).values) v.fail("index arrays differ; ");

  // Whole CLI artifacts, except the run manifests that carry timestamps.
  const fs::path dir = fs::temp_directory_path() / ("thc_acceptance_det_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  int files = 0;
  for (const char* sub : {"a", "b"}) {
    if (cli({"genbench", "--grid", "--length", "65536", "-o", (dir / sub).string()}) != 0) v.fail("genbench failed; ");
  }
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file() || e.path().filename() == "run.json") continue;
    const fs::path twin = dir / "b" / fs::relative(e.path(), dir / "a");
    ++files;
    if (!fs::exists(twin) || test::read_file(e.path().string()) != test::read_file(twin.string())) {
      v.fail("artifact differs: " + twin.string() + "; ");
    }
  }
  fs::remove_all(dir);
  v.detail << kernels << " kernels round-tripped, " << files << " artifacts byte-identical";
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void(Verdict&)>>> criteria = {
      {"template fidelity", template_fidelity},
      {"equivalence sweep", equivalence_sweep},
      {"partition laws", partition_laws},
      {"LSU goldens", lsu_goldens},
      {"divergence labeling", divergence_labeling},
      {"AI exactness", ai_exactness},
      {"cache calibration", cache_calibration},
      {"round-trip and determinism", round_trip_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      criteria[i].second(v);
    } catch (const std::exception& e) {
      v.fail(std::string("exception: ") + e.what());
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first
              << "): " << v.detail.str() << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
