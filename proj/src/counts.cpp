#include "thc/counts.hpp"

#include "thc/typing.hpp"

namespace thc {

namespace {

class Counter {
 public:
  explicit Counter(const Kernel& k) : symbols_(k) {}

  void block(const Block& b) {
    symbols_.push();
    for (const Stmt& s : b) stmt(s);
    symbols_.pop();
  }

  OpCounts counts;

 private:
  bool is_local(const std::string& array) const {
    const Symbol* sym = symbols_.lookup(array);
    return sym && sym->type.space == AddressSpace::Local;
  }

  static bool is_float_op(AssignOp op) { return op != AssignOp::Set; }

  void expr(const Expr& e) {
    if (const auto* a = e.as<ArrayLoad>()) {
      ++(is_local(a->array) ? counts.local_loads : counts.loads);
      expr(*a->index);
    } else if (const auto* u = e.as<Unary>()) {
      expr(*u->operand);
    } else if (const auto* b = e.as<Binary>()) {
      expr(*b->lhs);
      expr(*b->rhs);
      if (b->op <= BinaryOp::Div && type_of(e, symbols_) == ScalarType::Float) ++counts.arithmetic;
    } else if (const auto* c = e.as<Call>()) {
      for (const Expr& arg : c->args) expr(arg);
    }
  }

  void compound(ScalarType target, AssignOp op, const std::optional<Expr>& value) {
    if (!is_float_op(op)) return;
    const ScalarType rhs = value ? type_of(*value, symbols_) : ScalarType::Int;
    if (promote(target, rhs) == ScalarType::Float) ++counts.arithmetic;
  }

  void stmt(const Stmt& s) {
    if (const auto* d = s.as<Decl>()) {
      if (d->init) expr(*d->init);
      symbols_.declare(d->name, symbol_for(*d));
    } else if (const auto* a = s.as<Assign>()) {
      if (a->value) expr(*a->value);
      compound(symbols_.lookup(a->target)->type.scalar, a->op, a->value);
    } else if (const auto* st = s.as<Store>()) {
      expr(st->index);
      expr(st->value);
      const bool local = is_local(st->array);
      if (st->op != AssignOp::Set) ++(local ? counts.local_loads : counts.loads);
      ++(local ? counts.local_stores : counts.stores);
      compound(symbols_.lookup(st->array)->type.scalar, st->op, st->value);
    } else if (const auto* i = s.as<If>()) {
      expr(i->cond);
      block(i->then_body);
      block(i->else_body);
    } else if (const auto* f = s.as<For>()) {
      symbols_.push();
      stmt(*f->init);
      expr(f->cond);
      stmt(*f->step);
      block(f->body);
      symbols_.pop();
    } else if (s.as<Barrier>()) {
      ++counts.barriers;
    } else if (const auto* n = s.as<Nested>()) {
      block(n->body);
    }
  }

  SymbolTable symbols_;
};

}  // namespace

OpCounts count_ops(const Kernel& kernel) {
  Counter c(kernel);
  c.block(kernel.body);
  return c.counts;
}

}  // namespace thc
