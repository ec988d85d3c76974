#include <set>

#include "doctest.h"
#include "test_util.hpp"
#include "thc/buffers.hpp"
#include "thc/coarsen.hpp"
#include "thc/counts.hpp"
#include "thc/error.hpp"
#include "thc/parser.hpp"
#include "thc/verify.hpp"

using namespace thc;

namespace {

CoarsenConfig consecutive(int c) { return CoarsenConfig{CoarsenKind::Consecutive, c, std::nullopt}; }
CoarsenConfig gapped(int c, std::string extent = "N") { return CoarsenConfig{CoarsenKind::Gapped, c, extent}; }

ErrorKind coarsen_error(const std::string& src, const CoarsenConfig& cfg) {
  try {
    coarsen(parse(src), cfg);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected a transform error");
  return ErrorKind::Io;
}

void check_equivalent(const Kernel& original, const Kernel& transformed, int c, std::size_t g, std::size_t l,
                      std::int32_t extent, std::uint64_t seed) {
  const Kernel reparsed = parse(print(transformed));
  REQUIRE(reparsed == transformed);
  const InputPlan plan = random_plan(original, g, extent, seed);
  const TrialResult r = compare_runs(Program(original), Program(transformed), g, l, c, materialize(plan));
  INFO(print(transformed));
  INFO(r.error);
  if (r.mismatch) INFO(r.mismatch->buffer << "[" << r.mismatch->index << "]");
  CHECK(r.status == TrialResult::Status::Match);
}

const char* kGridKernel = R"(__kernel void grid(__global float *a, __global int *sel, __global float *o, int N) {
  float scale = 0.5f;
  for (int gid = get_global_id(0); gid < N; gid += get_global_size(0)) {
    float x = a[gid];
    float acc = x * scale;
    for (int i = 0; i < 3; i++) {
      acc += x / (i + 1);
      if (get_global_id(0) % 2 == 0) { acc = acc - 1.0f; }
    }
    if (sel[gid] % 3 == 0) { acc *= 2.0f; } else if (x > 1.0f) { acc = -acc; }
    int k = sel[gid] % 4;
    for (int j = 0; j < k; j++) { acc += 0.25f; }
    o[gid] = acc + get_global_size(0);
  }
})";

const char* kFlatKernel = R"(__kernel void flat(__global float *a, __global float *b, __global float *c, int N) {
  int i = get_global_id(0);
  float t = a[i] * b[i];
  float u = t - a[i] / b[i];
  if (i % 4 == 1) { u += 1.0f; }
  c[i] = u * (get_global_size(0) - i);
})";

const char* kLocalKernel = R"(__kernel void tile(__global float *a, __global float *o) {
  __local float buf[256];
  int l = get_local_id(0);
  buf[l] = a[get_global_id(0)] * 2.0f;
  barrier(CLK_LOCAL_MEM_FENCE);
  float v = buf[get_local_size(0) - 1 - l];
  o[get_global_id(0)] = v + get_group_id(0);
})";

}  // namespace

TEST_CASE("figure 3 consecutive template") {
  const Kernel out = coarsen(parse(test::read_golden("multiplication.cl")), consecutive(2));
  const Kernel expected = parse(test::read_golden("multiplication_consecutive2.cl"));
  CHECK(same_structure(out, expected));
  CHECK(out == expected);
  CHECK(print(out) == print(expected));
}

TEST_CASE("figure 3 gapped template") {
  const Kernel out = coarsen(parse(test::read_golden("multiplication.cl")), gapped(2));
  const Kernel expected = parse(test::read_golden("multiplication_gapped2.cl"));
  CHECK(same_structure(out, expected));
  CHECK(out == expected);
}

TEST_CASE("degree 1 is the identity") {
  for (const std::string& src : {test::read_golden("multiplication.cl"), std::string(kGridKernel), std::string(kFlatKernel),
                                 std::string(kLocalKernel)}) {
    const Kernel k = parse(src);
    CHECK(coarsen(k, consecutive(1)) == k);
    CHECK(coarsen(k, gapped(1)) == k);
  }
}

TEST_CASE("partition laws by enumeration") {
  for (int g : {8, 16, 64}) {
    for (int c : {1, 2, 4, 8}) {
      const int n = g;
      std::multiset<int> cons, gap;
      for (int id = 0; id < g / c; ++id) {
        for (int k = 0; k < c; ++k) cons.insert(id * c + k);
      }
      for (int id = 0; id < n / c; ++id) {
        for (int k = 0; k < c; ++k) gap.insert(id + (n / c) * k);
      }
      std::multiset<int> all;
      for (int i = 0; i < n; ++i) all.insert(i);
      CHECK(cons == all);
      CHECK(gap == all);
    }
  }
}

TEST_CASE("coarsened kernels touch every element exactly once") {
  const char* grid = R"(__kernel void cover(__global int *hits, int N) {
  for (int gid = get_global_id(0); gid < N; gid += get_global_size(0)) { hits[gid] = hits[gid] + 1; }
})";
  const char* flat = R"(__kernel void cover(__global int *hits, int N) {
  int i = get_global_id(0);
  hits[i] = hits[i] + 1;
})";
  for (const char* src : {grid, flat}) {
    const Kernel k = parse(src);
    for (std::size_t g : {8u, 16u, 64u}) {
      for (int c : {1, 2, 4, 8}) {
        for (const CoarsenConfig& cfg : {consecutive(c), gapped(c)}) {
          BufferSet mem;
          mem.buffers["hits"] = Buffer::zeros(ScalarType::Int, g);
          mem.scalars["N"] = ScalarValue::of_int(static_cast<std::int32_t>(g));
          const ExecResult r = interpret(coarsen(k, cfg), LaunchConfig{g / c}, mem);
          CHECK(r.memory.buffers.at("hits").words == std::vector<std::uint32_t>(g, 1));
        }
      }
    }
  }
}

TEST_CASE("coarsened kernels agree with the original under the interpreter") {
  const Kernel fig3 = parse(test::read_golden("multiplication.cl"));
  const Kernel grid = parse(kGridKernel);
  const Kernel flat = parse(kFlatKernel);
  const Kernel local = parse(kLocalKernel);
  std::uint64_t seed = 1;
  for (int c : {2, 4, 8}) {
    for (const Kernel* k : {&fig3, &grid, &flat}) {
      check_equivalent(*k, coarsen(*k, consecutive(c)), c, 256, 0, 256, seed++);
      check_equivalent(*k, coarsen(*k, gapped(c)), c, 256, 0, 256, seed++);
      check_equivalent(*k, coarsen(*k, consecutive(c)), c, 512, 64, 512, seed++);
    }
    check_equivalent(local, coarsen(local, consecutive(c)), c, 512, 256, 512, seed++);
  }
  // Grid-stride loops also cover extents larger than the launch.
  check_equivalent(grid, coarsen(grid, consecutive(4)), 4, 64, 0, 64, 99);
  const InputPlan plan = random_plan(grid, 1024, 1024, 5);
  const Kernel g4 = coarsen(grid, consecutive(4));
  CHECK(compare_runs(Program(grid), Program(g4), 64, 0, 4, materialize(plan)).status == TrialResult::Status::Match);
  const Kernel gg4 = coarsen(grid, gapped(4));
  CHECK(compare_runs(Program(grid), Program(gg4), 64, 0, 4, materialize(plan)).status == TrialResult::Status::Match);
}

TEST_CASE("straight-line statement accounting") {
  const Kernel fig3 = parse(test::read_golden("multiplication.cl"));
  const char* chain = R"(__kernel void s(__global float *a, __global float *b, __global float *o) {
  __local float t[64];
  float x = a[get_global_id(0)];
  float y = b[get_global_id(0)];
  float z = x * y + x / y - 1.0f;
  t[get_local_id(0)] = z;
  barrier(CLK_LOCAL_MEM_FENCE);
  z += t[0];
  o[get_global_id(0)] = z;
})";
  const Kernel s = parse(chain);
  for (int c : {2, 4, 8}) {
    for (const Kernel* k : {&fig3, &s}) {
      const OpCounts base = count_ops(*k);
      for (const CoarsenConfig& cfg : {consecutive(c), gapped(c)}) {
        if (k == &s && cfg.kind == CoarsenKind::Gapped) continue;
        const OpCounts out = count_ops(coarsen(*k, cfg));
        CHECK(out.loads == c * base.loads);
        CHECK(out.stores == c * base.stores);
        CHECK(out.arithmetic == c * base.arithmetic);
        CHECK(out.barriers == base.barriers);
      }
    }
  }
}

TEST_CASE("loads, arithmetic and stores are clustered by phase") {
  const Kernel out = coarsen(parse(test::read_golden("multiplication.cl")), consecutive(4));
  const Block& body = out.body[0].as<For>()->body;
  REQUIRE(body.size() == 4 + 8 + 4 + 4);
  for (int k = 0; k < 4; ++k) CHECK(body[k].as<Decl>()->name == "gid_" + std::to_string(k));
  for (int i = 4; i < 12; ++i) CHECK(body[i].as<Decl>()->init->as<ArrayLoad>());
  for (int i = 12; i < 16; ++i) CHECK(body[i].as<Decl>()->init->as<Binary>());
  for (int i = 16; i < 20; ++i) CHECK(body[i].as<Store>());
}

TEST_CASE("barriers stay single and divergent regions are replicated per lane") {
  const Kernel out = coarsen(parse(kLocalKernel), consecutive(4));
  CHECK(count_ops(out).barriers == 1);
  const Kernel grid = coarsen(parse(kGridKernel), consecutive(2));
  const std::string text = print(grid);
  CHECK(text.find("if (get_global_id(0) * 2 + 0 % 2 == 0)") == std::string::npos);
  CHECK(text.find("if ((get_global_id(0) * 2 + 0) % 2 == 0)") != std::string::npos);
  CHECK(text.find("if ((get_global_id(0) * 2 + 1) % 2 == 0)") != std::string::npos);
  // The constant-bound loop is kept once; the data-bound loop is per lane.
  CHECK(text.find("for (int i = 0; i < 3; i++)") != std::string::npos);
  CHECK(text.find("for (int j_0 = 0; j_0 < k_0; j_0++)") != std::string::npos);
}

TEST_CASE("two consecutive degree-2 steps match one degree-4 step") {
  for (const char* src : {kGridKernel, kFlatKernel}) {
    const Kernel k = parse(src);
    const Kernel twice = coarsen(coarsen(k, consecutive(2)), consecutive(2));
    const Kernel once = coarsen(k, consecutive(4));
    const InputPlan plan = random_plan(k, 256, 256, 17);
    const BufferSet inputs = materialize(plan);
    const ExecResult a = interpret(k, LaunchConfig{256}, inputs);
    const ExecResult b = interpret(twice, LaunchConfig{64}, inputs);
    const ExecResult c = interpret(once, LaunchConfig{64}, inputs);
    CHECK(a.memory == b.memory);
    CHECK(b.memory == c.memory);
  }
}

TEST_CASE("tail policies") {
  const Kernel k = parse(test::read_golden("multiplication.cl"));
  const InputPlan plan = random_plan(k, 1024, 1001, 3);
  const BufferSet inputs = materialize(plan);

  const Kernel strict = coarsen(k, gapped(4));
  CHECK(strict.notes == std::vector<std::string>{"requires: N % 4 == 0"});
  const TrialResult bad = compare_runs(Program(k), Program(strict), 256, 0, 4, inputs);
  CHECK(bad.status == TrialResult::Status::Error);
  CHECK(bad.error_kind == ErrorKind::Precondition);

  for (CoarsenConfig cfg : {consecutive(4), gapped(4)}) {
    cfg.extent_param = "N";
    cfg.tail_policy = TailPolicy::GuardTails;
    const Kernel guarded = coarsen(k, cfg);
    CHECK(guarded.notes.empty());
    const TrialResult r = compare_runs(Program(k), Program(guarded), 256, 0, 4, inputs);
    INFO(print(guarded));
    CHECK(r.status == TrialResult::Status::Match);
  }
  CHECK(coarsen(k, consecutive(4)).notes == std::vector<std::string>{"requires: N % 4 == 0"});
}

TEST_CASE("renaming avoids collisions") {
  const char* src = R"(__kernel void r(__global float *a, __global float *o) {
  float x = a[get_global_id(0)];
  float x_1 = x + 1.0f;
  float y__0 = x_1 * 2.0f;
  o[get_global_id(0)] = y__0;
})";
  const Kernel k = parse(src);
  const Kernel out = coarsen(k, consecutive(2));
  const std::string text = print(out);
  CHECK(text.find("float x__0 = ") != std::string::npos);
  CHECK(text.find("float x_1_0 = ") != std::string::npos);
  check_equivalent(k, out, 2, 64, 0, 64, 4);
}

TEST_CASE("transform rejections") {
  CHECK(coarsen_error("__kernel void k(__global int *a){ a[get_global_id(1)] = 0; }", consecutive(2)) ==
        ErrorKind::Transform);
  CHECK(coarsen_error(test::read_golden("multiplication.cl"), CoarsenConfig{CoarsenKind::Gapped, 2, std::nullopt}) ==
        ErrorKind::InvalidSpec);
  CHECK(coarsen_error(test::read_golden("multiplication.cl"), gapped(2, "in0")) == ErrorKind::InvalidSpec);
  CHECK(coarsen_error(kLocalKernel, gapped(2, "N")) == ErrorKind::InvalidSpec);
  CHECK(coarsen_error(R"(__kernel void k(__global float *a, int N) {
  a[get_global_id(0)] = 1.0f;
  barrier(CLK_GLOBAL_MEM_FENCE);
})",
                      gapped(2)) == ErrorKind::Transform);
  CHECK(coarsen_error(R"(__kernel void k(__global float *a) {
  if (get_local_id(0) < 2) { barrier(CLK_LOCAL_MEM_FENCE); }
})",
                      consecutive(2)) == ErrorKind::Transform);
  CHECK(coarsen_error(R"(__kernel void k(__global float *a, int N, int M) {
  for (int g = get_global_id(0); g < M; g += get_global_size(0)) { a[g] = 1.0f; }
})",
                      gapped(2)) == ErrorKind::Transform);
  CHECK(coarsen_error(R"(__kernel void k(__global float *a, int N) {
  for (int g = get_global_id(0); g < N; g += get_global_size(0)) { a[g] = 1.0f; }
  for (int h = get_global_id(0); h < N; h += get_global_size(0)) { a[h] = 2.0f; }
})",
                      consecutive(2)) == ErrorKind::Transform);
  CHECK(coarsen_error(R"(__kernel void k(__global float *a, int N) {
  float s = 0.0f;
  for (int g = get_global_id(0); g < N; g += get_global_size(0)) { s += a[g]; }
})",
                      consecutive(2)) == ErrorKind::Transform);
  CHECK(coarsen_error(test::read_golden("multiplication.cl"), consecutive(0)) == ErrorKind::InvalidSpec);
}

TEST_CASE("SIMD and replication attributes") {
  const Kernel fig3 = parse(test::read_golden("multiplication.cl"));
  const Kernel simd = emit_simd(fig3, 8);
  CHECK(simd.attributes.simd_lanes == 8);
  CHECK(simd.body == fig3.body);

  const Kernel if_id = parse(R"(__kernel void k(__global float *a, int N) {
  for (int gid = get_global_id(0); gid < N; gid += get_global_size(0)) {
    if (get_global_id(0) % 2 == 0) { a[gid] = 1.0f; }
  }
})");
  try {
    emit_simd(if_id, 2);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Transform);
    CHECK(std::string(e.what()).find("if (get_global_id(0) % 2 == 0)") != std::string::npos);
  }
  const Kernel if_in = parse(R"(__kernel void k(__global float *a, __global int *input, int N) {
  for (int gid = get_global_id(0); gid < N; gid += get_global_size(0)) {
    if (input[get_global_id(0)] % 2 == 0) { a[gid] = 1.0f; }
  }
})");
  CHECK(emit_simd(if_in, 2).attributes.simd_lanes == 2);

  const Kernel rep = emit_replication(fig3, 4);
  CHECK(rep.attributes.compute_units == 4);
  CHECK(print(rep).find("num_compute_units(4)") != std::string::npos);
  CHECK(print(emit_replication(rep, 1)).find("num_compute_units") == std::string::npos);
  CHECK(parse(print(rep)) == rep);

  const Kernel both = emit_replication(coarsen(fig3, consecutive(4)), 2);
  CHECK(both.name == "thc_multiplication_c");
  CHECK(both.attributes.compute_units == 2);
  CHECK(count_ops(both).loads == 8);
}
