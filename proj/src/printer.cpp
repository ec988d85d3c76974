#include <charconv>
#include <sstream>

#include "thc/parser.hpp"

namespace thc {
namespace {

const char* scalar_name(ScalarType t) {
  switch (t) {
    case ScalarType::Int: return "int";
    case ScalarType::Uint: return "uint";
    case ScalarType::Float: return "float";
  }
  return "int";
}

const char* space_name(AddressSpace s) {
  switch (s) {
    case AddressSpace::Global: return "__global ";
    case AddressSpace::Local: return "__local ";
    case AddressSpace::Constant: return "__constant ";
    case AddressSpace::Private: return "";
  }
  return "";
}

int precedence(BinaryOp op) {
  switch (op) {
    case BinaryOp::LogicalOr: return 1;
    case BinaryOp::LogicalAnd: return 2;
    case BinaryOp::Eq:
    case BinaryOp::Ne: return 3;
    case BinaryOp::Lt:
    case BinaryOp::Le:
    case BinaryOp::Gt:
    case BinaryOp::Ge: return 4;
    case BinaryOp::Add:
    case BinaryOp::Sub: return 5;
    case BinaryOp::Mul:
    case BinaryOp::Div:
    case BinaryOp::Rem: return 6;
  }
  return 0;
}

const char* op_text(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Rem: return "%";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::LogicalAnd: return "&&";
    case BinaryOp::LogicalOr: return "||";
  }
  return "?";
}

constexpr int kUnaryPrecedence = 7;
constexpr int kPrimaryPrecedence = 8;

int expr_precedence(const Expr& e) {
  if (const auto* b = e.as<Binary>()) return precedence(b->op);
  if (e.as<Unary>()) return kUnaryPrecedence;
  return kPrimaryPrecedence;
}

std::string float_text(float v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, end);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s + "f";
}

void write_expr(std::ostream& os, const Expr& e);

void write_operand(std::ostream& os, const Expr& e, bool parens) {
  if (parens) os << '(';
  write_expr(os, e);
  if (parens) os << ')';
}

void write_expr(std::ostream& os, const Expr& e) {
  if (const auto* lit = e.as<IntLiteral>()) {
    os << lit->value;
    if (lit->is_unsigned && lit->value <= 0x7FFFFFFF) os << 'u';
  } else if (const auto* f = e.as<FloatLiteral>()) {
    os << float_text(f->value);
  } else if (const auto* v = e.as<VarRef>()) {
    os << v->name;
  } else if (const auto* a = e.as<ArrayLoad>()) {
    os << a->array << '[';
    write_expr(os, *a->index);
    os << ']';
  } else if (const auto* u = e.as<Unary>()) {
    os << (u->op == UnaryOp::Neg ? "-" : "!");
    // Nested unary operands are parenthesised so "- -x" never lexes as "--x".
    write_operand(os, *u->operand, expr_precedence(*u->operand) <= kUnaryPrecedence);
  } else if (const auto* b = e.as<Binary>()) {
    const int prec = precedence(b->op);
    // Left-associative: equal precedence needs parentheses only on the right.
    write_operand(os, *b->lhs, expr_precedence(*b->lhs) < prec);
    os << ' ' << op_text(b->op) << ' ';
    write_operand(os, *b->rhs, expr_precedence(*b->rhs) <= prec);
  } else if (const auto* c = e.as<Call>()) {
    os << c->callee << '(';
    for (std::size_t i = 0; i < c->args.size(); ++i) {
      if (i) os << ", ";
      write_expr(os, c->args[i]);
    }
    os << ')';
  }
}

const char* assign_text(AssignOp op) {
  switch (op) {
    case AssignOp::Set: return " = ";
    case AssignOp::Add: return " += ";
    case AssignOp::Sub: return " -= ";
    case AssignOp::Mul: return " *= ";
    case AssignOp::Div: return " /= ";
    case AssignOp::Inc: return "++";
    case AssignOp::Dec: return "--";
  }
  return " = ";
}

class Printer {
 public:
  explicit Printer(std::ostream& os) : os_(os) {}

  void block(const Block& b, int depth) {
    for (const Stmt& s : b) stmt(s, depth);
  }

  // Statement text without indentation or terminator; used for for-loop headers too.
  void simple(const Stmt& s) {
    if (const auto* d = s.as<Decl>()) {
      if (d->type.is_const) os_ << "const ";
      os_ << space_name(d->type.space) << scalar_name(d->type.scalar) << ' ' << d->name;
      if (d->array_length) os_ << '[' << *d->array_length << ']';
      if (d->init) {
        os_ << " = ";
        write_expr(os_, *d->init);
      }
    } else if (const auto* a = s.as<Assign>()) {
      os_ << a->target << assign_text(a->op);
      if (a->value) write_expr(os_, *a->value);
    } else if (const auto* st = s.as<Store>()) {
      os_ << st->array << '[';
      write_expr(os_, st->index);
      os_ << ']' << assign_text(st->op);
      write_expr(os_, st->value);
    }
  }

  void stmt(const Stmt& s, int depth) {
    indent(depth);
    if (const auto* i = s.as<If>()) {
      if_chain(*i, depth);
      os_ << '\n';
    } else if (const auto* f = s.as<For>()) {
      os_ << "for (";
      simple(*f->init);
      os_ << "; ";
      write_expr(os_, f->cond);
      os_ << "; ";
      simple(*f->step);
      os_ << ") {\n";
      block(f->body, depth + 1);
      indent(depth);
      os_ << "}\n";
    } else if (const auto* b = s.as<Barrier>()) {
      os_ << "barrier(" << b->flags << ");\n";
    } else if (const auto* n = s.as<Nested>()) {
      os_ << "{\n";
      block(n->body, depth + 1);
      indent(depth);
      os_ << "}\n";
    } else {
      simple(s);
      os_ << ";\n";
    }
  }

 private:
  void if_chain(const If& i, int depth) {
    os_ << "if (";
    write_expr(os_, i.cond);
    os_ << ") {\n";
    block(i.then_body, depth + 1);
    indent(depth);
    os_ << '}';
    if (i.else_body.empty()) return;
    if (i.else_body.size() == 1 && i.else_body.front().as<If>()) {
      os_ << " else ";
      if_chain(*i.else_body.front().as<If>(), depth);
      return;
    }
    os_ << " else {\n";
    block(i.else_body, depth + 1);
    indent(depth);
    os_ << '}';
  }

  void indent(int depth) {
    for (int i = 0; i < depth; ++i) os_ << "    ";
  }

  std::ostream& os_;
};

}  // namespace

std::string print(const Expr& expr) {
  std::ostringstream os;
  write_expr(os, expr);
  return os.str();
}

std::string print(const Kernel& kernel) {
  std::ostringstream os;
  for (const std::string& note : kernel.notes) os << "// " << note << '\n';
  if (kernel.attributes.simd_lanes) {
    os << "__attribute__((num_simd_work_items(" << *kernel.attributes.simd_lanes << ")))\n";
  }
  if (kernel.attributes.compute_units && *kernel.attributes.compute_units != 1) {
    os << "__attribute__((num_compute_units(" << *kernel.attributes.compute_units << ")))\n";
  }
  os << "__kernel void " << kernel.name << '(';
  for (std::size_t i = 0; i < kernel.params.size(); ++i) {
    const Param& p = kernel.params[i];
    if (i) os << ", ";
    if (p.type.is_const) os << "const ";
    os << space_name(p.type.space) << scalar_name(p.type.scalar);
    if (p.type.pointer) os << " *";
    if (p.type.is_restrict) os << " restrict";
    os << ' ' << p.name;
  }
  os << ") {\n";
  Printer printer(os);
  printer.block(kernel.body, 1);
  os << "}\n";
  return os.str();
}

}  // namespace thc
