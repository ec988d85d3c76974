#include <functional>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "test_util.hpp"
#include "thc/error.hpp"
#include "thc/parser.hpp"

using namespace thc;

namespace {

ErrorKind parse_error_kind(const std::string& src) {
  try {
    parse(src);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected a parse error for: " << src);
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("multiplication kernel parses into a strided loop with two loads, a multiply and a store") {
  const Kernel k = parse(test::read_golden("multiplication.cl"));
  CHECK(k.name == "multiplication");
  REQUIRE(k.params.size() == 4);
  CHECK(k.params[0].type.pointer);
  CHECK(k.params[0].type.space == AddressSpace::Global);
  CHECK(k.params[2].name == "N");
  CHECK_FALSE(k.params[2].type.pointer);

  REQUIRE(k.body.size() == 1);
  const For* loop = k.body[0].as<For>();
  REQUIRE(loop);
  CHECK(print(loop->cond) == "gid < N");
  REQUIRE(loop->body.size() == 4);
  const Decl* r0 = loop->body[0].as<Decl>();
  REQUIRE(r0);
  REQUIRE(r0->init);
  CHECK(r0->init->as<ArrayLoad>()->array == "in1");
  const Decl* r2 = loop->body[2].as<Decl>();
  REQUIRE(r2);
  CHECK(r2->init->as<Binary>()->op == BinaryOp::Mul);
  CHECK(loop->body[3].as<Store>());
}

TEST_CASE("empty kernel") {
  const Kernel k = parse("__kernel void k(){}");
  CHECK(k.name == "k");
  CHECK(k.params.empty());
  CHECK(k.body.empty());
  CHECK(print(k) == "__kernel void k() {\n}\n");
}

TEST_CASE("unsupported constructs are named") {
  CHECK(parse_error_kind("__kernel void k(__global int *a){ goto end; }") == ErrorKind::Unsupported);
  CHECK(parse_error_kind("struct S { int x; }; __kernel void k(){}") == ErrorKind::Unsupported);
  CHECK(parse_error_kind("__kernel void k(__global int *a){ a[0] = *(a + 1); }") == ErrorKind::Unsupported);
  CHECK(parse_error_kind("__kernel void k(__global int *a){ int x = a + 1; }") == ErrorKind::Unsupported);
  CHECK(parse_error_kind("__kernel void k(__global int *a){ while (1) { } }") == ErrorKind::Unsupported);
  CHECK(parse_error_kind("__kernel void k(__global int *a){ a[0] = a[1] << 2; }") == ErrorKind::Unsupported);
  CHECK(parse_error_kind("__kernel void k(__global int *a){ a[0] = (float)a[1]; }") == ErrorKind::Unsupported);
  CHECK(parse_error_kind("__kernel void k(__global int *a){ a[0] = foo(1); }") == ErrorKind::Unsupported);
  CHECK(parse_error_kind("__kernel void k(__global int *a){ int i = get_global_id(a[0]); }") ==
        ErrorKind::Unsupported);
  CHECK(parse_error_kind("__kernel void k(__global double *a){ }") == ErrorKind::Unsupported);

  try {
    parse("__kernel void k(__global int *a){\n  goto end;\n}");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("goto") != std::string::npos);
    CHECK(e.line() == 2);
    CHECK(e.column() == 3);
    CHECK(e.diagnostic("k.cl") == "k.cl:2:3: 'goto' is not supported");
  }
}

TEST_CASE("syntax and semantic errors carry locations") {
  CHECK(parse_error_kind("__kernel void k(__global int *a){ a[0] = 1 }") == ErrorKind::Syntax);
  CHECK(parse_error_kind("__kernel void k(__global int *a){ a[0] = x; }") == ErrorKind::Semantic);
  CHECK(parse_error_kind("__kernel void k(int a, int a){ }") == ErrorKind::Semantic);
  CHECK(parse_error_kind("__kernel void k(float *a){ }") == ErrorKind::Semantic);
  CHECK(parse_error_kind("__kernel void k(__global float *a){ a[0] = a[1] % 2; }") == ErrorKind::Semantic);
  CHECK(parse_error_kind("__kernel void k(__global float *a){ a[1.0f] = 0; }") == ErrorKind::Semantic);
  CHECK(parse_error_kind("__kernel void k(){ int x = 1; { int x = 2; } }") == ErrorKind::Semantic);
  CHECK(parse_error_kind("__kernel void k(){ int x = 1 @ 2; }") == ErrorKind::Syntax);
  CHECK(parse_error_kind("__kernel void a(){} __kernel void b(){}") == ErrorKind::Unsupported);
  try {
    parse("__kernel void k(__global int *a){\n  a[0] = y;\n}");
  } catch (const Error& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("attributes print and round-trip") {
  Kernel k = parse(test::read_golden("multiplication.cl"));
  k.attributes.simd_lanes = 4;
  const std::string text = print(k);
  CHECK(text.find("__attribute__((num_simd_work_items(4)))") != std::string::npos);
  CHECK(parse(text) == k);
}

TEST_CASE("canonical printing of the multiplication kernel") {
  const Kernel k = parse(test::read_golden("multiplication.cl"));
  CHECK(print(k) ==
        "__kernel void multiplication(__global float * in0, __global float * in1, int N, __global float * out0) {\n"
        "    for (int gid = get_global_id(0); gid < N; gid += get_global_size(0)) {\n"
        "        float r0 = in1[gid];\n"
        "        float r1 = in0[gid];\n"
        "        float r2 = r1 * r0;\n"
        "        out0[gid] = r2;\n"
        "    }\n"
        "}\n");
}

TEST_CASE("round trip of control flow, barriers and local arrays") {
  const char* src = R"(// keep me
__kernel void mix(__global const float * restrict a, __local float * scratch, uint n, __global int * flags) {
  __local float tile[64];
  int lid = get_local_id(0);
  tile[lid] = a[get_global_id(0)] * -2.5f;
  barrier(CLK_LOCAL_MEM_FENCE | CLK_GLOBAL_MEM_FENCE);
  for (int i = 0; i < 4; i++) {
    if (flags[lid] % 3 == 0 && !(lid < 2)) { tile[lid] += 1.0f; }
    else if (lid - (i - 1) > 0 || n >= 7u) { tile[lid] = fabs(tile[lid]) / sqrt(2.0f); }
    else { tile[lid] -= min(1.0f, max(0.5f, 3e-5f)); }
  }
  { float t = tile[0]; scratch[lid] = t; }
  flags[lid] = lid / 2 - (lid - 1) * 3;
}
)";
  const Kernel k = parse(src);
  CHECK(k.notes == std::vector<std::string>{"keep me"});
  const std::string once = print(k);
  const Kernel again = parse(once);
  CHECK(again == k);
  CHECK(print(again) == once);
}

TEST_CASE("parenthesisation round-trips over random expressions") {
  std::mt19937_64 rng(7);
  const BinaryOp ops[] = {BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div, BinaryOp::Rem,
                          BinaryOp::Lt,  BinaryOp::Eq,  BinaryOp::Ne,  BinaryOp::LogicalAnd, BinaryOp::LogicalOr};
  std::function<Expr(int)> gen = [&](int depth) -> Expr {
    const int pick = static_cast<int>(rng() % (depth > 0 ? 6 : 2));
    switch (pick) {
      case 0: return build::int_lit(static_cast<std::int64_t>(rng() % 100));
      case 1: return build::var(rng() % 2 ? "x" : "y");
      case 2: return build::unary(rng() % 2 ? UnaryOp::Neg : UnaryOp::Not, gen(depth - 1));
      default: return build::binary(ops[rng() % std::size(ops)], gen(depth - 1), gen(depth - 1));
    }
  };
  for (int trial = 0; trial < 500; ++trial) {
    Kernel k;
    k.name = "p";
    k.params.push_back(Param{"out", Type{ScalarType::Int, true, AddressSpace::Global}});
    k.params.push_back(Param{"x", Type{}});
    k.params.push_back(Param{"y", Type{}});
    k.body.push_back(build::store("out", build::int_lit(0), gen(5)));
    const std::string text = print(k);
    INFO(text);
    CHECK(parse(text) == k);
  }
}

TEST_CASE("float literal printing is exact") {
  for (float v : {0.1f, 1.0f, 3.4028235e38f, 1.17549435e-38f, 1e-45f, 123456.789f, 2.5f}) {
    Kernel k;
    k.name = "f";
    k.params.push_back(Param{"out", Type{ScalarType::Float, true, AddressSpace::Global}});
    k.body.push_back(build::store("out", build::int_lit(0), build::float_lit(v)));
    CHECK(parse(print(k)) == k);
  }
}
