#include "thc/divergence.hpp"

#include <map>

#include "thc/parser.hpp"

namespace thc {

const char* to_string(Divergence d) {
  switch (d) {
    case Divergence::None: return "none";
    case Divergence::Direct: return "direct";
    case Divergence::Indirect: return "indirect";
  }
  return "?";
}

namespace {

struct Taint {
  bool direct = false;
  bool indirect = false;

  Taint operator|(Taint o) const { return {direct || o.direct, indirect || o.indirect}; }
  bool operator==(const Taint&) const = default;
};

class Tainter {
 public:
  std::map<std::string, Taint, std::less<>> vars;
  std::vector<BranchLabel>* labels = nullptr;
  bool changed = false;

  Taint expr(const Expr& e) const {
    if (const auto* v = e.as<VarRef>()) {
      auto it = vars.find(v->name);
      return it == vars.end() ? Taint{} : it->second;
    }
    if (e.as<ArrayLoad>()) return Taint{false, true};
    if (const auto* u = e.as<Unary>()) return expr(*u->operand);
    if (const auto* b = e.as<Binary>()) return expr(*b->lhs) | expr(*b->rhs);
    if (const auto* c = e.as<Call>()) {
      if (c->callee == "get_global_id" || c->callee == "get_local_id") return Taint{true, false};
      Taint t;
      for (const Expr& a : c->args) t = t | expr(a);
      return t;
    }
    return {};
  }

  void taint(const std::string& name, Taint t) {
    Taint& cur = vars[name];
    const Taint next = cur | t;
    if (!(next == cur)) {
      cur = next;
      changed = true;
    }
  }

  void label(const char* construct, const Expr& cond, Taint t) {
    if (!labels) return;
    BranchLabel l{construct, print(cond), Divergence::None, t.direct, t.indirect};
    l.label = t.indirect ? Divergence::Indirect : t.direct ? Divergence::Direct : Divergence::None;
    labels->push_back(std::move(l));
  }

  void block(const Block& b, Taint control) {
    for (const Stmt& s : b) stmt(s, control);
  }

  void stmt(const Stmt& s, Taint control) {
    if (const auto* d = s.as<Decl>()) {
      if (d->init) taint(d->name, expr(*d->init) | control);
      else taint(d->name, control);
    } else if (const auto* a = s.as<Assign>()) {
      Taint t = control | expr(Expr{VarRef{a->target}});
      if (a->value) t = t | expr(*a->value);
      taint(a->target, a->op == AssignOp::Set && a->value ? expr(*a->value) | control : t);
    } else if (const auto* i = s.as<If>()) {
      const Taint c = expr(i->cond);
      label("if", i->cond, c);
      block(i->then_body, control | c);
      block(i->else_body, control | c);
    } else if (const auto* f = s.as<For>()) {
      stmt(*f->init, control);
      stmt(*f->step, control);
      const Taint c = expr(f->cond);
      label("for", f->cond, c);
      block(f->body, control);
    } else if (const auto* n = s.as<Nested>()) {
      block(n->body, control);
    }
  }
};

}  // namespace

std::vector<BranchLabel> classify_divergence(const Kernel& kernel) {
  Tainter t;
  do {
    t.changed = false;
    t.block(kernel.body, {});
  } while (t.changed);
  std::vector<BranchLabel> labels;
  t.labels = &labels;
  t.block(kernel.body, {});
  return labels;
}

}  // namespace thc
