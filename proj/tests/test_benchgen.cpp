#include <algorithm>
#include <set>

#include "doctest.h"
#include "thc/benchgen.hpp"
#include "thc/coarsen.hpp"
#include "thc/counts.hpp"
#include "thc/error.hpp"
#include "thc/parser.hpp"
#include "thc/verify.hpp"

using namespace thc;

namespace {

BenchSpec small(BenchSpec s, std::size_t n = 256) {
  s.length = n;
  return s;
}

int count_occurrences(const Kernel& k, const std::string& prefix) {
  const std::string text = print(k);
  int n = 0;
  for (std::size_t pos = 0; (pos = text.find(prefix, pos)) != std::string::npos; ++pos) ++n;
  return n;
}

}  // namespace

TEST_CASE("benchgen: default spec is the eight-load AI 6 baseline") {
  const Kernel k = generate(BenchSpec{});
  const OpCounts c = count_ops(k);
  CHECK(c.loads == 8);
  CHECK(c.stores == 1);
  CHECK(c.arithmetic == 54);
  CHECK(c.arithmetic == 6 * c.memory());
  const std::string text = print(k);
  CHECK(text.find("for (int gid = get_global_id(0); gid < N; gid += get_global_size(0))") != std::string::npos);
  CHECK(text.find("float r0 = in7[gid];") != std::string::npos);
  CHECK(text.find("float r7 = in0[gid];") != std::string::npos);
  CHECK(text.find("out0[gid] = r61;") != std::string::npos);
}

TEST_CASE("benchgen: AI is exact over the whole sweep") {
  for (const BenchSpec& s : bench_sweep(1024, 3)) {
    const OpCounts c = count_ops(generate(s));
    CAPTURE(spec_name(s));
    CHECK(c.arithmetic == s.ai * c.memory());
    CHECK(c.stores == 1);
  }
}

TEST_CASE("benchgen: divergence wrappers") {
  BenchSpec s;
  s.divergence = DivergencePattern::IfId;
  CHECK(print(generate(s)).find("if (get_global_id(0) % 2 == 0)") != std::string::npos);
  s.divergence = DivergencePattern::IfIn;
  CHECK(print(generate(s)).find("if (input0[get_global_id(0)] % 2 == 0)") != std::string::npos);
  s.divergence = DivergencePattern::ForConstantIfId;
  const std::string fc = print(generate(s));
  CHECK(fc.find("for (int i0 = 0; i0 < 5; i0++)") != std::string::npos);
  CHECK(fc.find("if (get_global_id(0) % 2 == 0)") > fc.find("for (int i0"));
  s.divergence = DivergencePattern::ForInIfIn;
  CHECK(count_ops(generate(s)).loads == 10);

  s.divergence = DivergencePattern::IfIn;
  s.divergence_degree = 2;
  CHECK(count_ops(generate(s)).loads == 9);
  CHECK(print(generate(s)).find("} else {") != std::string::npos);
  s.divergence_degree = 4;
  const Kernel d4 = generate(s);
  CHECK(count_ops(d4).loads == 10);
  CHECK(count_occurrences(d4, "else if") == 2);
}

TEST_CASE("benchgen: indirect mode routes data loads through the index array") {
  BenchSpec s;
  s.access = AccessMode::Indirect;
  const Kernel k = generate(s);
  const std::string text = print(k);
  CHECK(text.find("int idx = index[gid];") != std::string::npos);
  CHECK(count_occurrences(k, "[idx]") == 8);
  CHECK(text.find("out0[gid]") != std::string::npos);
  CHECK(count_ops(k).loads == 9);
}

TEST_CASE("benchgen: spec validation") {
  auto rejects = [](BenchSpec s) {
    try {
      generate(s);
    } catch (const Error& e) {
      return e.kind() == ErrorKind::InvalidSpec;
    }
    return false;
  };
  BenchSpec s;
  s.ai = 5;
  CHECK(rejects(s));
  s = {};
  s.divergence_degree = 2;
  CHECK(rejects(s));
  s.divergence = DivergencePattern::IfId;
  CHECK(rejects(s));
  s = {};
  s.divergence = DivergencePattern::IfIn;
  s.divergence_degree = 3;
  CHECK(rejects(s));
  s = {};
  s.irregularity = 4;
  CHECK(rejects(s));
  s.access = AccessMode::Indirect;
  s.irregularity = 0;
  CHECK(rejects(s));
  s = {};
  s.num_loads = 0;
  CHECK(rejects(s));
  s = {};
  CHECK_THROWS_AS(bench_plan(small([] {
                    BenchSpec x;
                    x.access = AccessMode::Indirect;
                    return x;
                  }())),
                  Error);
}

TEST_CASE("benchgen: labels agree with construction") {
  for (const BenchSpec& s : bench_sweep(64, 0)) {
    const auto labels = classify_divergence(generate(s));
    const auto expected = expected_divergence(s);
    CAPTURE(spec_name(s));
    REQUIRE(labels.size() == expected.size());
    for (std::size_t i = 0; i < labels.size(); ++i) CHECK(labels[i].label == expected[i]);
  }
}

TEST_CASE("benchgen: generated kernels round-trip and survive coarsening") {
  for (BenchSpec s : bench_sweep(512, 7)) {
    s.irregularity = s.access == AccessMode::Indirect ? std::optional<std::int64_t>(4) : std::nullopt;
    const Kernel k = generate(s);
    CAPTURE(spec_name(s));
    REQUIRE(parse(print(k)) == k);
    const BufferSet inputs = materialize(bench_plan(s));
    const Program original(k);
    const ExecResult expected = original.run(LaunchConfig{512, 64}, inputs);
    for (auto kind : {CoarsenKind::Consecutive, CoarsenKind::Gapped}) {
      for (int c : {2, 4, 8}) {
        const Kernel t = coarsen(k, CoarsenConfig{kind, c, std::string("N")});
        REQUIRE(parse(print(t)) == t);
        const TrialResult r = compare_against(expected, Program(t), 512, 64, c, inputs);
        CAPTURE(c);
        CAPTURE(r.error);
        CHECK(r.status == TrialResult::Status::Match);
      }
    }
  }
}

TEST_CASE("benchgen: determinism") {
  BenchSpec s;
  s.access = AccessMode::Indirect;
  s.divergence = DivergencePattern::ForInIfIn;
  s.seed = 11;
  CHECK(print(generate(s)) == print(generate(s)));
  s.length = 1000;
  CHECK(bench_plan(s, 10) == bench_plan(s, 10));
  CHECK(materialize(bench_plan(s, 10)).buffers == materialize(bench_plan(s, 10)).buffers);
  CHECK(generate_indices(1000, 7, 3).values == generate_indices(1000, 7, 3).values);
  BenchSpec other = s;
  other.seed = 12;
  CHECK(print(generate(s)) != print(generate(other)));
}

TEST_CASE("benchgen: grid and sweep shapes") {
  const auto grid = bench_grid(1 << 10, 0);
  CHECK(grid.size() == 17);
  std::map<std::string, int> groups;
  for (const auto& e : grid) ++groups[e.group];
  CHECK(groups["ai"] == 4);
  CHECK(groups["divergence"] == 4);
  CHECK(groups["degree"] == 3);
  CHECK(groups["hit-rate"] == 6);
  const auto sweep = bench_sweep(1 << 10, 0);
  CHECK(sweep.size() == 56);
  std::set<std::string> names;
  for (const auto& s : sweep) names.insert(spec_name(s));
  CHECK(names.size() == sweep.size());
}

TEST_CASE("indices: examples") {
  std::vector<std::int32_t> identity(64);
  for (int i = 0; i < 64; ++i) identity[i] = i;
  CHECK(generate_indices(64, 64, 5).values == identity);

  const IndexArray runs = generate_indices(16, 4, 9);
  REQUIRE(runs.values.size() == 16);
  for (int r = 0; r < 4; ++r) {
    for (int j = 1; j < 4; ++j) CHECK(runs.values[4 * r + j] == runs.values[4 * r] + j);
  }

  // D = 1: every index is an independent draw; reproduce with the same generator.
  const IndexArray single = generate_indices(8, 1, 42);
  std::mt19937_64 rng(42);
  for (int i = 0; i < 8; ++i) CHECK(single.values[i] == static_cast<std::int32_t>(uniform_below(rng, 8)));

  CHECK_THROWS_AS(generate_indices(8, 9, 0), Error);
  CHECK_THROWS_AS(generate_indices(8, 0, 0), Error);
}

TEST_CASE("indices: property: runs are in bounds and consecutive") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + uniform_below(gen, 300);
    const auto d = static_cast<std::int64_t>(1 + uniform_below(gen, n));
    const IndexArray a = generate_indices(n, d, gen());
    REQUIRE(a.values.size() == n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(a.values[i] >= 0);
      CHECK(static_cast<std::size_t>(a.values[i]) < n);
      if (i % static_cast<std::size_t>(d) != 0) CHECK(a.values[i] == a.values[i - 1] + 1);
    }
  }
}

TEST_CASE("cache: simulator") {
  CHECK(simulate_cache(std::vector<std::int32_t>(100, 5)) == doctest::Approx(0.99));
  // 32-byte lines hold eight floats: a sequential sweep misses once per line.
  std::vector<std::int32_t> seq(4096);
  for (int i = 0; i < 4096; ++i) seq[i] = i;
  CHECK(simulate_cache(seq) == doctest::Approx(7.0 / 8.0));
  // Two lines mapping to the same direct-mapped set evict each other.
  const std::int32_t stride = 524288 / 8 / 4;  // elements per cache capacity
  CHECK(simulate_cache({0, stride, 0, stride}) == 0.0);
  CacheModel two_way;
  two_way.associativity = 2;
  CHECK(simulate_cache({0, stride, 0, stride}, two_way) == 0.5);
  CHECK(simulate_cache(generate_indices(1 << 20, 1, 0)) < 0.03);
  CHECK_THROWS_AS(simulate_cache(std::vector<std::int32_t>{}), Error);
  CacheModel bad;
  bad.capacity_bits = 100;
  CHECK_THROWS_AS(validate(bad), Error);
}

TEST_CASE("cache: hit rate is non-decreasing over a degree sweep") {
  for (std::uint64_t seed : {0, 1, 2}) {
    double prev = -1;
    for (std::int64_t d = 1; d <= 1024; d *= 2) {
      const double rate = simulate_cache(generate_indices(1 << 20, d, seed));
      CAPTURE(seed);
      CAPTURE(d);
      CHECK(rate >= prev);
      prev = rate;
    }
  }
}

TEST_CASE("cache: calibration") {
  const Calibration zero = calibrate(0.0, CacheModel{}, 1 << 20, 0);
  CHECK(zero.degree == 1);
  CHECK(zero.reachable);
  CHECK(zero.achieved < 0.05);
  CHECK_FALSE(calibrate(0.20, CacheModel{}, 1 << 20, 0).reachable);
  const Calibration dflt = calibrate(kDefaultHitRate, CacheModel{}, 1 << 20, 0);
  CHECK(dflt.reachable);
  CHECK(std::abs(dflt.achieved - kDefaultHitRate) <= 0.05);
  CHECK(calibrate(1.0, CacheModel{}, 1 << 12, 0).degree == 1 << 12);
  CHECK_THROWS_AS(calibrate(1.5, CacheModel{}, 64, 0), Error);
}
