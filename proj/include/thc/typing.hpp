#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "thc/ast.hpp"

namespace thc {

struct Symbol {
  Type type;
  bool is_array = false;  // pointer parameter or __local array
};

/// Lexically scoped symbol table. The outermost scope holds the parameters.
class SymbolTable {
 public:
  SymbolTable() { push(); }
  explicit SymbolTable(const Kernel& kernel);

  void push() { scopes_.emplace_back(); }
  void pop() { scopes_.pop_back(); }
  /// False when the name already exists in the innermost scope.
  bool declare(const std::string& name, Symbol symbol);
  const Symbol* lookup(std::string_view name) const;

 private:
  std::vector<std::map<std::string, Symbol, std::less<>>> scopes_;
};

/// Usual arithmetic conversions restricted to int/uint/float.
ScalarType promote(ScalarType a, ScalarType b);

bool is_arithmetic(BinaryOp op);

/// Type of an already validated expression.
ScalarType type_of(const Expr& expr, const SymbolTable& symbols);

Symbol symbol_for(const Decl& decl);

}  // namespace thc
