#include "doctest.h"
#include "test_util.hpp"
#include "thc/coarsen.hpp"
#include "thc/divergence.hpp"
#include "thc/lsu.hpp"
#include "thc/parser.hpp"

using namespace thc;

namespace {

Kernel multiplication() { return parse(test::read_golden("multiplication.cl")); }

Kernel coarsened(CoarsenKind kind, int c) { return coarsen(multiplication(), CoarsenConfig{kind, c, std::string("N")}); }

LsuEntry entry(std::string ptr, bool store, int count, int width, bool cached) {
  return LsuEntry{std::move(ptr), store, LsuKind::BurstCoalesced, count, width, cached, cached ? 524288 : 0};
}

std::vector<LsuEntry> per_pointer(int count, int width, bool cached) {
  return {entry("in0", false, count, width, cached), entry("in1", false, count, width, cached),
          entry("out0", true, count, width, cached)};
}

std::vector<BranchLabel> labels(const std::string& src) { return classify_divergence(parse(src)); }

}  // namespace

TEST_CASE("lsu: multiplication baseline, consecutive and gapped") {
  const LsuReport base = analyze(multiplication());
  CHECK(base.lsus == per_pointer(1, 32, false));
  CHECK(to_json(base) == test::read_golden("lsu_baseline.json"));

  const LsuReport cons = analyze(coarsened(CoarsenKind::Consecutive, 8));
  CHECK(cons.lsus == per_pointer(1, 512, false));
  CHECK(to_json(cons) == test::read_golden("lsu_consecutive8.json"));

  const LsuReport gap = analyze(coarsened(CoarsenKind::Gapped, 8));
  CHECK(gap.lsus == per_pointer(8, 32, true));
  CHECK(to_json(gap) == test::read_golden("lsu_gapped8.json"));
}

TEST_CASE("lsu: consecutive width grows with degree and splits past the cap") {
  for (int c : {2, 4, 8, 16}) {
    const LsuReport r = analyze(coarsened(CoarsenKind::Consecutive, c));
    const int width = std::min(64 * c, 512);
    const int count = (64 * c + 511) / 512;
    CAPTURE(c);
    CHECK(r.lsus == per_pointer(count, width, false));
  }
  for (int c : {2, 4, 16}) {
    CAPTURE(c);
    CHECK(analyze(coarsened(CoarsenKind::Gapped, c)).lsus == per_pointer(c, 32, true));
  }
}

TEST_CASE("lsu: access classes") {
  const LsuReport r = analyze(parse(R"(
__kernel void k(__global float* a, __global int* idx, __global float* out, int n) {
  int i = get_global_id(0);
  out[i] = a[2 * i] + a[idx[i]];
  for (int j = 0; j < n; j++) {
    out[i] += a[j];
  }
})"));
  REQUIRE(r.accesses.size() >= 4);
  bool saw_strided = false, saw_data = false;
  for (const auto& a : r.accesses) {
    if (a.pointer == "a" && a.index_class == IndexClass::StridedAffine) saw_strided = true;
    if (a.pointer == "a" && a.index_class == IndexClass::DataDependent) saw_data = true;
  }
  CHECK(saw_strided);
  CHECK(saw_data);
  bool cached_a = false, prefetch_a = false;
  for (const auto& e : r.lsus) {
    if (e.pointer == "a" && e.cached) cached_a = true;
    if (e.pointer == "a" && e.kind == LsuKind::Prefetching) prefetch_a = true;
  }
  CHECK(cached_a);
  CHECK(prefetch_a);
}

TEST_CASE("lsu: json shape") {
  const std::string j = to_json(analyze(multiplication()));
  CHECK(j.find("\"model_version\": \"thc-lsu-1\"") != std::string::npos);
  CHECK(j.back() == '\n');
}

TEST_CASE("divergence: labels") {
  auto l = labels(R"(
__kernel void k(__global float* a, __global int* in, int n) {
  int i = get_global_id(0);
  if (i < n) { a[i] = 1.0f; }
  if (in[0] > 3) { a[0] = 2.0f; }
  if (n > 3) { a[1] = 3.0f; }
})");
  REQUIRE(l.size() == 3);
  CHECK(l[0].label == Divergence::Direct);
  CHECK(l[1].label == Divergence::Indirect);
  CHECK(l[2].label == Divergence::None);
  CHECK(l[0].construct == "if");
  CHECK(l[0].condition == "i < n");

  l = labels(test::read_golden("multiplication.cl"));
  REQUIRE(l.size() == 1);
  CHECK(l[0].construct == "for");
  CHECK(l[0].label == Divergence::Direct);
}

TEST_CASE("divergence: taint flows through assignments and control") {
  auto l = labels(R"(
__kernel void k(__global int* a, int n) {
  int t = 0;
  if (get_local_id(0) == 0) { t = 1; }
  if (t > 0) { a[0] = 1; }
  int v = a[1];
  int w = v + 1;
  for (int j = 0; j < w; j++) { a[2] = j; }
  if (v > 0 && get_global_id(0) > 2) { a[3] = 1; }
})");
  REQUIRE(l.size() == 4);
  CHECK(l[0].label == Divergence::Direct);
  CHECK(l[1].label == Divergence::Direct);
  CHECK(l[2].construct == "for");
  CHECK(l[2].label == Divergence::Indirect);
  CHECK(l[3].id_dependent);
  CHECK(l[3].data_dependent);
  CHECK(l[3].label == Divergence::Indirect);
}
