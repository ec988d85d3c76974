#include "thc/typing.hpp"

namespace thc {

SymbolTable::SymbolTable(const Kernel& kernel) {
  push();
  for (const Param& p : kernel.params) declare(p.name, Symbol{p.type, p.type.pointer});
}

bool SymbolTable::declare(const std::string& name, Symbol symbol) {
  return scopes_.back().emplace(name, symbol).second;
}

const Symbol* SymbolTable::lookup(std::string_view name) const {
  for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
    auto found = it->find(name);
    if (found != it->end()) return &found->second;
  }
  return nullptr;
}

ScalarType promote(ScalarType a, ScalarType b) {
  if (a == ScalarType::Float || b == ScalarType::Float) return ScalarType::Float;
  if (a == ScalarType::Uint || b == ScalarType::Uint) return ScalarType::Uint;
  return ScalarType::Int;
}

bool is_arithmetic(BinaryOp op) {
  return op == BinaryOp::Add || op == BinaryOp::Sub || op == BinaryOp::Mul || op == BinaryOp::Div ||
         op == BinaryOp::Rem;
}

ScalarType type_of(const Expr& expr, const SymbolTable& symbols) {
  struct Visitor {
    const SymbolTable& symbols;
    ScalarType operator()(const IntLiteral& lit) const { return lit.is_unsigned ? ScalarType::Uint : ScalarType::Int; }
    ScalarType operator()(const FloatLiteral&) const { return ScalarType::Float; }
    ScalarType operator()(const VarRef& v) const {
      const Symbol* s = symbols.lookup(v.name);
      return s ? s->type.scalar : ScalarType::Int;
    }
    ScalarType operator()(const ArrayLoad& a) const {
      const Symbol* s = symbols.lookup(a.array);
      return s ? s->type.scalar : ScalarType::Int;
    }
    ScalarType operator()(const Unary& u) const {
      return u.op == UnaryOp::Not ? ScalarType::Int : type_of(*u.operand, symbols);
    }
    ScalarType operator()(const Binary& b) const {
      if (!is_arithmetic(b.op)) return ScalarType::Int;
      return promote(type_of(*b.lhs, symbols), type_of(*b.rhs, symbols));
    }
    ScalarType operator()(const Call& c) const {
      if (c.callee == "fabs" || c.callee == "sqrt") return ScalarType::Float;
      if (c.callee == "min" || c.callee == "max") {
        return promote(type_of(c.args.at(0), symbols), type_of(c.args.at(1), symbols));
      }
      return ScalarType::Int;
    }
  };
  return std::visit(Visitor{symbols}, expr.node);
}

Symbol symbol_for(const Decl& decl) { return Symbol{decl.type, decl.array_length.has_value()}; }

}  // namespace thc
