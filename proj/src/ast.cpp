#include "thc/ast.hpp"
#include "thc/error.hpp"

#include <array>
#include <algorithm>

namespace thc {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Syntax: return "syntax error";
    case ErrorKind::Unsupported: return "unsupported construct";
    case ErrorKind::Semantic: return "semantic error";
    case ErrorKind::Transform: return "transform error";
    case ErrorKind::Precondition: return "precondition error";
    case ErrorKind::OutOfBounds: return "out-of-bounds access";
    case ErrorKind::DataRace: return "data race";
    case ErrorKind::BarrierDivergence: return "barrier divergence";
    case ErrorKind::DivisionByZero: return "division by zero";
    case ErrorKind::InvalidSpec: return "invalid benchmark spec";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& message, int line, int column)
    : std::runtime_error(message), kind_(kind), line_(line), column_(column) {}

std::string Error::diagnostic(const std::string& file) const {
  if (line_ > 0) {
    return file + ":" + std::to_string(line_) + ":" + std::to_string(column_) + ": " + what();
  }
  return file + ": " + what();
}

const Param* Kernel::find_param(std::string_view param_name) const {
  auto it = std::find_if(params.begin(), params.end(), [&](const Param& p) { return p.name == param_name; });
  return it == params.end() ? nullptr : &*it;
}

bool same_structure(const Kernel& a, const Kernel& b) {
  return a.name == b.name && a.params == b.params && a.body == b.body && a.attributes == b.attributes;
}

bool is_work_item_builtin(std::string_view name) {
  static constexpr std::array<std::string_view, 5> kNames = {
      "get_global_id", "get_global_size", "get_local_id", "get_local_size", "get_group_id"};
  return std::find(kNames.begin(), kNames.end(), name) != kNames.end();
}

bool is_math_builtin(std::string_view name) {
  return name == "min" || name == "max" || name == "fabs" || name == "sqrt";
}

namespace build {

Expr int_lit(std::int64_t v) { return Expr{IntLiteral{v, false}}; }
Expr float_lit(float v) { return Expr{FloatLiteral{v}}; }
Expr var(std::string name) { return Expr{VarRef{std::move(name)}}; }
Expr load(std::string array, Expr index) { return Expr{ArrayLoad{std::move(array), std::move(index)}}; }
Expr binary(BinaryOp op, Expr lhs, Expr rhs) { return Expr{Binary{op, std::move(lhs), std::move(rhs)}}; }
Expr unary(UnaryOp op, Expr operand) { return Expr{Unary{op, std::move(operand)}}; }
Expr call(std::string callee, std::vector<Expr> args) { return Expr{Call{std::move(callee), std::move(args)}}; }
Expr builtin(std::string callee, int dim) { return call(std::move(callee), {int_lit(dim)}); }

Stmt decl(ScalarType t, std::string name, std::optional<Expr> init) {
  Type type;
  type.scalar = t;
  return Stmt{Decl{type, std::move(name), std::nullopt, std::move(init)}};
}

Stmt assign(std::string target, AssignOp op, std::optional<Expr> value) {
  return Stmt{Assign{std::move(target), op, std::move(value)}};
}

Stmt store(std::string array, Expr index, Expr value) {
  return Stmt{Store{std::move(array), std::move(index), AssignOp::Set, std::move(value)}};
}

}  // namespace build
}  // namespace thc
