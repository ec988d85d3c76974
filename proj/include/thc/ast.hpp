#pragma once

// Syntax tree for the supported OpenCL-C kernel subset.
//
// Nodes are plain values: copying a Kernel deep-copies the tree and operator==
// is structural equality. Float literals compare by bit pattern.

#include <bit>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace thc {

/// Owning, copyable, never-null pointer. Lets recursive variants keep value semantics.
template <class T>
class Box {
 public:
  Box(T value) : ptr_(std::make_unique<T>(std::move(value))) {}  // NOLINT(implicit)
  Box(const Box& other) : ptr_(std::make_unique<T>(*other.ptr_)) {}
  Box(Box&&) noexcept = default;
  Box& operator=(const Box& other) {
    if (this != &other) ptr_ = std::make_unique<T>(*other.ptr_);
    return *this;
  }
  Box& operator=(Box&&) noexcept = default;
  ~Box() = default;

  T& operator*() { return *ptr_; }
  const T& operator*() const { return *ptr_; }
  T* operator->() { return ptr_.get(); }
  const T* operator->() const { return ptr_.get(); }

  friend bool operator==(const Box& a, const Box& b) { return *a.ptr_ == *b.ptr_; }

 private:
  std::unique_ptr<T> ptr_;
};

enum class ScalarType : std::uint8_t { Int, Uint, Float };
enum class AddressSpace : std::uint8_t { Private, Global, Local, Constant };

struct Type {
  ScalarType scalar = ScalarType::Int;
  bool pointer = false;
  AddressSpace space = AddressSpace::Private;
  bool is_const = false;
  bool is_restrict = false;

  bool operator==(const Type&) const = default;
};

struct Param {
  std::string name;
  Type type;

  bool operator==(const Param&) const = default;
};

enum class BinaryOp : std::uint8_t { Add, Sub, Mul, Div, Rem, Lt, Le, Gt, Ge, Eq, Ne, LogicalAnd, LogicalOr };
enum class UnaryOp : std::uint8_t { Neg, Not };

struct Expr;

struct IntLiteral {
  std::int64_t value = 0;
  bool is_unsigned = false;
  bool operator==(const IntLiteral&) const = default;
};

struct FloatLiteral {
  float value = 0.0f;
  friend bool operator==(const FloatLiteral& a, const FloatLiteral& b) {
    return std::bit_cast<std::uint32_t>(a.value) == std::bit_cast<std::uint32_t>(b.value);
  }
};

struct VarRef {
  std::string name;
  bool operator==(const VarRef&) const = default;
};

struct ArrayLoad {
  std::string array;
  Box<Expr> index;
  bool operator==(const ArrayLoad&) const = default;
};

struct Unary {
  UnaryOp op;
  Box<Expr> operand;
  bool operator==(const Unary&) const = default;
};

struct Binary {
  BinaryOp op;
  Box<Expr> lhs;
  Box<Expr> rhs;
  bool operator==(const Binary&) const = default;
};

/// Work-item builtins (literal dimension argument) and the fixed math set.
struct Call {
  std::string callee;
  std::vector<Expr> args;
  bool operator==(const Call&) const = default;
};

struct Expr {
  std::variant<IntLiteral, FloatLiteral, VarRef, ArrayLoad, Unary, Binary, Call> node;
  bool operator==(const Expr&) const = default;

  template <class T>
  const T* as() const { return std::get_if<T>(&node); }
  template <class T>
  T* as() { return std::get_if<T>(&node); }
};

enum class AssignOp : std::uint8_t { Set, Add, Sub, Mul, Div, Inc, Dec };

struct Stmt;
using Block = std::vector<Stmt>;

/// `type name;`, `type name = init;` or `__local type name[len];`.
struct Decl {
  Type type;
  std::string name;
  std::optional<std::int64_t> array_length;
  std::optional<Expr> init;
  bool operator==(const Decl&) const = default;
};

/// Scalar variable update. `value` is empty for Inc/Dec.
struct Assign {
  std::string target;
  AssignOp op = AssignOp::Set;
  std::optional<Expr> value;
  bool operator==(const Assign&) const = default;
};

struct Store {
  std::string array;
  Expr index;
  AssignOp op = AssignOp::Set;
  Expr value;
  bool operator==(const Store&) const = default;
};

/// `else if` chains are an If whose else_body holds exactly one If.
struct If {
  Expr cond;
  Block then_body;
  Block else_body;
  bool operator==(const If&) const = default;
};

struct For {
  Box<Stmt> init;  // Decl or Assign
  Expr cond;
  Box<Stmt> step;  // Assign
  Block body;
  bool operator==(const For&) const = default;
};

struct Barrier {
  std::string flags;  // e.g. "CLK_LOCAL_MEM_FENCE | CLK_GLOBAL_MEM_FENCE"
  bool operator==(const Barrier&) const = default;
};

struct Nested {
  Block body;
  bool operator==(const Nested&) const = default;
};

struct Stmt {
  std::variant<Decl, Assign, Store, If, For, Barrier, Nested> node;
  bool operator==(const Stmt&) const = default;

  template <class T>
  const T* as() const { return std::get_if<T>(&node); }
  template <class T>
  T* as() { return std::get_if<T>(&node); }
};

struct KernelAttributes {
  std::optional<int> simd_lanes;     // num_simd_work_items
  std::optional<int> compute_units;  // num_compute_units
  bool operator==(const KernelAttributes&) const = default;
};

struct Kernel {
  std::string name;
  std::vector<Param> params;
  Block body;
  KernelAttributes attributes;
  /// Leading `//` comment lines, without the slashes. Carries transform obligations.
  std::vector<std::string> notes;

  bool operator==(const Kernel&) const = default;

  const Param* find_param(std::string_view param_name) const;
};

/// Equality ignoring notes (comments are not structure).
bool same_structure(const Kernel& a, const Kernel& b);

// Builtins recognised by the subset.
bool is_work_item_builtin(std::string_view name);
bool is_math_builtin(std::string_view name);

// Construction helpers used by transforms, the generator and tests.
namespace build {
Expr int_lit(std::int64_t v);
Expr float_lit(float v);
Expr var(std::string name);
Expr load(std::string array, Expr index);
Expr binary(BinaryOp op, Expr lhs, Expr rhs);
Expr unary(UnaryOp op, Expr operand);
Expr call(std::string callee, std::vector<Expr> args);
Expr builtin(std::string callee, int dim);
Stmt decl(ScalarType t, std::string name, std::optional<Expr> init);
Stmt assign(std::string target, AssignOp op, std::optional<Expr> value);
Stmt store(std::string array, Expr index, Expr value);
}  // namespace build

}  // namespace thc
