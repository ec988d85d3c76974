#pragma once

#include <string>
#include <string_view>

#include "thc/ast.hpp"

namespace thc {

/// Parses exactly one kernel of the subset (grammar in docs/grammar.md).
/// Throws thc::Error with a line/column on any rejection.
Kernel parse(std::string_view source);

/// Canonical source text: one statement per line, explicit braces, 4-space indent.
std::string print(const Kernel& kernel);
std::string print(const Expr& expr);

}  // namespace thc
