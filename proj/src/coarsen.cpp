#include "thc/coarsen.hpp"

#include <functional>
#include <map>
#include <set>

#include "thc/divergence.hpp"
#include "thc/error.hpp"
#include "thc/parser.hpp"

namespace thc {

const char* to_string(CoarsenKind kind) { return kind == CoarsenKind::Consecutive ? "consecutive" : "gapped"; }

const char* to_string(TailPolicy policy) {
  return policy == TailPolicy::RequireDivisible ? "require-divisible" : "guard-tails";
}

namespace {

[[noreturn]] void fail(const std::string& message) { throw Error(ErrorKind::Transform, message); }

bool is_call(const Expr& e, std::string_view callee) {
  const auto* c = e.as<Call>();
  return c && c->callee == callee;
}

template <class F>
void visit_expr(const Expr& e, F&& f) {
  f(e);
  if (const auto* a = e.as<ArrayLoad>()) visit_expr(*a->index, f);
  else if (const auto* u = e.as<Unary>()) visit_expr(*u->operand, f);
  else if (const auto* b = e.as<Binary>()) {
    visit_expr(*b->lhs, f);
    visit_expr(*b->rhs, f);
  } else if (const auto* c = e.as<Call>()) {
    for (const Expr& arg : c->args) visit_expr(arg, f);
  }
}

// Calls fs on every statement and fe on every expression, recursively.
template <class FS, class FE>
void visit_block(const Block& b, FS&& fs, FE&& fe);

template <class FS, class FE>
void visit_stmt(const Stmt& s, FS&& fs, FE&& fe) {
  fs(s);
  if (const auto* d = s.as<Decl>()) {
    if (d->init) visit_expr(*d->init, fe);
  } else if (const auto* a = s.as<Assign>()) {
    if (a->value) visit_expr(*a->value, fe);
  } else if (const auto* st = s.as<Store>()) {
    visit_expr(st->index, fe);
    visit_expr(st->value, fe);
  } else if (const auto* i = s.as<If>()) {
    visit_expr(i->cond, fe);
    visit_block(i->then_body, fs, fe);
    visit_block(i->else_body, fs, fe);
  } else if (const auto* f = s.as<For>()) {
    visit_stmt(*f->init, fs, fe);
    visit_expr(f->cond, fe);
    visit_stmt(*f->step, fs, fe);
    visit_block(f->body, fs, fe);
  } else if (const auto* n = s.as<Nested>()) {
    visit_block(n->body, fs, fe);
  }
}

template <class FS, class FE>
void visit_block(const Block& b, FS&& fs, FE&& fe) {
  for (const Stmt& s : b) visit_stmt(s, fs, fe);
}

bool block_has(const Block& b, const std::function<bool(const Stmt&)>& ps,
               const std::function<bool(const Expr&)>& pe) {
  bool found = false;
  visit_block(
      b, [&](const Stmt& s) { found = found || ps(s); }, [&](const Expr& e) { found = found || pe(e); });
  return found;
}

bool stmt_has(const Stmt& s, const std::function<bool(const Stmt&)>& ps, const std::function<bool(const Expr&)>& pe) {
  return block_has(Block{s}, ps, pe);
}

bool no_expr(const Expr&) { return false; }
bool no_stmt(const Stmt&) { return false; }

bool has_barrier(const Block& b) {
  return block_has(b, [](const Stmt& s) { return s.as<Barrier>() != nullptr; }, no_expr);
}

bool assigns(const Block& b, const std::string& name) {
  return block_has(
      b,
      [&](const Stmt& s) {
        const auto* a = s.as<Assign>();
        return a && a->target == name;
      },
      no_expr);
}

/// k when e is `callee(0)` (k = 1) or `callee(0) * k` with a positive literal k.
std::optional<std::int64_t> id_factor(const Expr& e, std::string_view callee) {
  if (is_call(e, callee)) return 1;
  const auto* b = e.as<Binary>();
  if (!b || b->op != BinaryOp::Mul || !is_call(*b->lhs, callee)) return std::nullopt;
  const auto* lit = b->rhs->as<IntLiteral>();
  if (!lit || lit->is_unsigned || lit->value <= 0) return std::nullopt;
  return lit->value;
}

struct GridLoop {
  std::size_t index = 0;
  std::string var;
  Type var_type;
  std::int64_t factor = 1;
  Expr bound;
};

std::optional<GridLoop> match_grid_loop(const Stmt& s) {
  const auto* f = s.as<For>();
  if (!f) return std::nullopt;
  const auto* init = f->init->as<Decl>();
  if (!init || init->array_length || !init->init || init->type.scalar == ScalarType::Float) return std::nullopt;
  const auto a = id_factor(*init->init, "get_global_id");
  if (!a) return std::nullopt;
  const auto* cond = f->cond.as<Binary>();
  if (!cond || cond->op != BinaryOp::Lt) return std::nullopt;
  const auto* lhs = cond->lhs->as<VarRef>();
  if (!lhs || lhs->name != init->name) return std::nullopt;
  const auto* step = f->step->as<Assign>();
  if (!step || step->target != init->name || step->op != AssignOp::Add || !step->value) return std::nullopt;
  if (id_factor(*step->value, "get_global_size") != a) return std::nullopt;
  return GridLoop{0, init->name, init->type, *a, *cond->rhs};
}

Expr call0(const char* callee) { return build::builtin(callee, 0); }
Expr mul(Expr a, Expr b) { return build::binary(BinaryOp::Mul, std::move(a), std::move(b)); }
Expr add(Expr a, Expr b) { return build::binary(BinaryOp::Add, std::move(a), std::move(b)); }

class Coarsener {
 public:
  Coarsener(const Kernel& kernel, const CoarsenConfig& config)
      : in_(kernel), cfg_(config), c_(config.degree), gapped_(config.kind == CoarsenKind::Gapped) {}

  Kernel run() {
    check_dimensions();
    find_grid_loop();
    if (gapped_) check_gapped();
    collect_taken();
    if (gapped_) gl_name_ = fresh("gapped_length");

    const Block& lane_body = grid_ ? in_.body[grid_->index].as<For>()->body : in_.body;
    analyse_lane_body(lane_body);

    Kernel out = in_;
    out.name = "thc_" + in_.name + (gapped_ ? "_g" : "_c");
    out.body.clear();
    if (gapped_) {
      const Expr n = build::var(*cfg_.extent_param);
      Expr len = build::binary(BinaryOp::Div, n, build::int_lit(c_));
      if (cfg_.tail_policy == TailPolicy::GuardTails) {
        len = build::binary(BinaryOp::Div, add(n, build::int_lit(c_ - 1)), build::int_lit(c_));
      }
      out.body.push_back(build::decl(ScalarType::Int, gl_name_, std::move(len)));
    }
    if (grid_) emit_a_form(out.body);
    else emit_b_form(out.body);
    if (auto note = obligation()) out.notes.push_back(*note);
    return out;
  }

 private:
  // ---- preconditions -----------------------------------------------------

  void check_dimensions() const {
    const bool bad = block_has(in_.body, no_stmt, [](const Expr& e) {
      const auto* c = e.as<Call>();
      if (!c || !is_work_item_builtin(c->callee)) return false;
      const auto* dim = c->args.at(0).as<IntLiteral>();
      return !dim || dim->value != 0;
    });
    if (bad) fail("only 1-D kernels can be coarsened: every work-item builtin must use dimension 0");
  }

  void find_grid_loop() {
    for (std::size_t i = 0; i < in_.body.size(); ++i) {
      auto g = match_grid_loop(in_.body[i]);
      if (!g) continue;
      if (grid_) fail("more than one grid-stride loop at kernel scope");
      g->index = i;
      grid_ = std::move(g);
    }
    if (!grid_) return;
    const Block& body = in_.body[grid_->index].as<For>()->body;
    if (assigns(body, grid_->var)) fail("the grid-stride loop body assigns its index '" + grid_->var + "'");
    for (std::size_t i = 0; i < in_.body.size(); ++i) {
      if (i == grid_->index) continue;
      const bool uses_id = stmt_has(in_.body[i], no_stmt, [](const Expr& e) {
        return is_call(e, "get_global_id") || is_call(e, "get_local_id");
      });
      if (uses_id) fail("statements outside the grid-stride loop depend on the work-item id");
      if (const auto* d = in_.body[i].as<Decl>(); d && !d->array_length && assigns(body, d->name)) {
        fail("the grid-stride loop body assigns '" + d->name + "', which is declared outside it");
      }
    }
  }

  void check_gapped() const {
    if (!cfg_.extent_param) throw Error(ErrorKind::InvalidSpec, "gapped coarsening requires an extent parameter");
    const Param* p = in_.find_param(*cfg_.extent_param);
    if (!p || p->type.pointer || p->type.scalar != ScalarType::Int) {
      throw Error(ErrorKind::InvalidSpec, "extent parameter '" + *cfg_.extent_param + "' is not an int parameter");
    }
    if (grid_) {
      if (grid_->factor != 1) fail("gapped coarsening requires a grid-stride loop over get_global_id(0) itself");
      const auto* bound = grid_->bound.as<VarRef>();
      if (!bound || bound->name != *cfg_.extent_param) {
        fail("gapped coarsening requires the loop bound to be the extent parameter '" + *cfg_.extent_param + "'");
      }
    }
    const bool barrier = has_barrier(in_.body);
    if (barrier) fail("gapped coarsening does not support barriers");
    for (const Param& q : in_.params) {
      if (q.type.pointer && q.type.space == AddressSpace::Local) fail("gapped coarsening does not support local memory");
    }
    const bool local = block_has(
        in_.body, [](const Stmt& s) { return s.as<Decl>() && s.as<Decl>()->array_length.has_value(); },
        [](const Expr& e) { return is_call(e, "get_local_id") || is_call(e, "get_group_id"); });
    if (local) fail("gapped coarsening does not support local memory, local ids or group ids");
  }

  // ---- naming --------------------------------------------------------------

  void collect_taken() {
    for (const Param& p : in_.params) taken_.insert(p.name);
    visit_block(
        in_.body,
        [&](const Stmt& s) {
          if (const auto* d = s.as<Decl>()) taken_.insert(d->name);
        },
        no_expr);
  }

  std::string fresh(std::string base) {
    while (taken_.count(base)) base += "_";
    taken_.insert(base);
    return base;
  }

  std::string choose_separator(const std::string& name) {
    for (const char* sep : {"_", "__", "___"}) {
      bool free = true;
      for (int k = 0; k < c_ && free; ++k) free = !taken_.count(name + sep + std::to_string(k));
      if (!free) continue;
      for (int k = 0; k < c_; ++k) taken_.insert(name + sep + std::to_string(k));
      return sep;
    }
    fail("cannot find fresh lane names for '" + name + "'");
  }

  std::string lane_name(const std::string& name, int k) const { return name + separator_.at(name) + std::to_string(k); }

  // ---- lane analysis -------------------------------------------------------

  void collect_private(const Block& b) {
    priv_.clear();
    visit_block(
        b,
        [&](const Stmt& s) {
          if (const auto* d = s.as<Decl>(); d && !d->array_length) priv_.insert(d->name);
        },
        no_expr);
    for (const For* f : uniform_loops_) {
      const std::string& counter = f->init->as<Decl>()->name;
      // A counter name also declared elsewhere stays private; the loop is demoted below.
      int uses = 0;
      visit_block(
          b,
          [&](const Stmt& s) {
            if (const auto* d = s.as<Decl>(); d && d->name == counter) ++uses;
          },
          no_expr);
      if (uses == 1) priv_.erase(counter);
    }
  }

  bool uniform(const Expr& e) const {
    bool ok = true;
    visit_expr(e, [&](const Expr& x) {
      if (const auto* v = x.as<VarRef>()) ok = ok && !priv_.count(v->name) && !(grid_ && v->name == grid_->var);
      else if (x.as<ArrayLoad>()) ok = false;
      else if (is_call(x, "get_global_id") || is_call(x, "get_local_id")) ok = false;
    });
    return ok;
  }

  bool loop_uniform(const For& f) const {
    const auto* init = f.init->as<Decl>();
    if (priv_.count(init->name) || !init->init || !uniform(*init->init) || !uniform(f.cond)) return false;
    const auto* step = f.step->as<Assign>();
    if (!step || step->target != init->name || (step->value && !uniform(*step->value))) return false;
    return !assigns(f.body, init->name);
  }

  void analyse_lane_body(const Block& body) {
    visit_block(
        body,
        [&](const Stmt& s) {
          if (const auto* f = s.as<For>(); f && f->init->as<Decl>()) uniform_loops_.insert(f);
        },
        no_expr);
    for (;;) {
      collect_private(body);
      bool changed = false;
      for (auto it = uniform_loops_.begin(); it != uniform_loops_.end();) {
        if (loop_uniform(**it)) {
          ++it;
        } else {
          it = uniform_loops_.erase(it);
          changed = true;
        }
      }
      if (!changed) break;
    }
    if (grid_) separator_[grid_->var] = choose_separator(grid_->var);
    for (const std::string& name : priv_) separator_[name] = choose_separator(name);
  }

  // ---- rewriting -----------------------------------------------------------

  Expr lane_id(int k) const {
    if (!gapped_) return add(mul(call0("get_global_id"), build::int_lit(c_)), build::int_lit(k));
    if (grid_) {
      return build::binary(BinaryOp::Rem, build::var(lane_name(grid_->var, k)),
                           mul(call0("get_global_size"), build::int_lit(c_)));
    }
    return add(call0("get_global_id"), mul(build::var(gl_name_), build::int_lit(k)));
  }

  Expr lane_expr(const Expr& e, int k) const {
    if (const auto* v = e.as<VarRef>()) {
      if (grid_ && v->name == grid_->var) return build::var(lane_name(v->name, k));
      if (priv_.count(v->name)) return build::var(lane_name(v->name, k));
      return e;
    }
    if (const auto* a = e.as<ArrayLoad>()) return build::load(a->array, lane_expr(*a->index, k));
    if (const auto* u = e.as<Unary>()) return build::unary(u->op, lane_expr(*u->operand, k));
    if (const auto* b = e.as<Binary>()) return build::binary(b->op, lane_expr(*b->lhs, k), lane_expr(*b->rhs, k));
    if (const auto* c = e.as<Call>()) {
      if (c->callee == "get_global_id") return lane_id(k);
      if (c->callee == "get_global_size" || c->callee == "get_local_size") return mul(e, build::int_lit(c_));
      if (c->callee == "get_local_id") return add(mul(e, build::int_lit(c_)), build::int_lit(k));
      if (c->callee == "get_group_id") return e;
      std::vector<Expr> args;
      for (const Expr& arg : c->args) args.push_back(lane_expr(arg, k));
      return build::call(c->callee, std::move(args));
    }
    return e;
  }

  std::string lane_target(const std::string& name, int k) const {
    return priv_.count(name) ? lane_name(name, k) : name;
  }

  Block lane_block(const Block& b, int k) const {
    Block out;
    for (const Stmt& s : b) {
      if (const auto* d = s.as<Decl>(); d && d->array_length) continue;  // emitted once by the caller
      out.push_back(lane_stmt(s, k));
    }
    return out;
  }

  Stmt lane_stmt(const Stmt& s, int k) const {
    if (const auto* d = s.as<Decl>()) {
      Decl copy = *d;
      copy.name = lane_target(d->name, k);
      if (d->init) copy.init = lane_expr(*d->init, k);
      return Stmt{std::move(copy)};
    }
    if (const auto* a = s.as<Assign>()) {
      Assign copy = *a;
      copy.target = lane_target(a->target, k);
      if (a->value) copy.value = lane_expr(*a->value, k);
      return Stmt{std::move(copy)};
    }
    if (const auto* st = s.as<Store>()) {
      return Stmt{Store{st->array, lane_expr(st->index, k), st->op, lane_expr(st->value, k)}};
    }
    if (const auto* i = s.as<If>()) {
      return Stmt{If{lane_expr(i->cond, k), lane_block(i->then_body, k), lane_block(i->else_body, k)}};
    }
    if (const auto* f = s.as<For>()) {
      return Stmt{For{lane_stmt(*f->init, k), lane_expr(f->cond, k), lane_stmt(*f->step, k), lane_block(f->body, k)}};
    }
    if (const auto* n = s.as<Nested>()) return Stmt{Nested{lane_block(n->body, k)}};
    fail("barrier inside a work-item-dependent region cannot be coarsened");
  }

  static bool straight_line(const Stmt& s) {
    if (const auto* d = s.as<Decl>()) return !d->array_length;
    return s.as<Assign>() || s.as<Store>();
  }

  static int phase(const Stmt& s) {
    if (s.as<Store>()) return 2;
    bool load = false;
    visit_stmt(s, [](const Stmt&) {}, [&](const Expr& e) { load = load || e.as<ArrayLoad>(); });
    return load ? 0 : 1;
  }

  void replicate(const Stmt& s, Block& out) const {
    if (stmt_has(s, [](const Stmt& x) { return x.as<Barrier>() != nullptr; }, no_expr)) {
      fail("barrier inside a work-item-dependent region cannot be coarsened");
    }
    for (int k = 0; k < c_; ++k) out.push_back(lane_stmt(s, k));
  }

  Block coarsen_block(const Block& b) const {
    Block out;
    std::size_t i = 0;
    while (i < b.size()) {
      const Stmt& s = b[i];
      if (straight_line(s)) {
        std::size_t j = i;
        while (j < b.size() && straight_line(b[j]) && phase(b[j]) == phase(s)) ++j;
        for (int k = 0; k < c_; ++k) {
          for (std::size_t x = i; x < j; ++x) out.push_back(lane_stmt(b[x], k));
        }
        i = j;
        continue;
      }
      if (s.as<Decl>() || s.as<Barrier>()) {
        out.push_back(s);
      } else if (const auto* iff = s.as<If>()) {
        if (uniform(iff->cond)) {
          out.push_back(Stmt{If{lane_expr(iff->cond, 0), coarsen_block(iff->then_body), coarsen_block(iff->else_body)}});
        } else {
          replicate(s, out);
        }
      } else if (const auto* f = s.as<For>()) {
        if (uniform_loops_.count(f)) {
          out.push_back(Stmt{For{lane_stmt(*f->init, 0), lane_expr(f->cond, 0), lane_stmt(*f->step, 0),
                                 coarsen_block(f->body)}});
        } else {
          replicate(s, out);
        }
      } else if (const auto* n = s.as<Nested>()) {
        out.push_back(Stmt{Nested{coarsen_block(n->body)}});
      }
      ++i;
    }
    return out;
  }

  // Per-lane copies, each wrapped in `if (index_k < bound)`.
  void guarded_lanes(const Block& body, const std::function<Expr(int)>& index, const Expr& bound, Block& out) const {
    if (has_barrier(body)) fail("guard-tails cannot wrap a body containing a barrier");
    for (const Stmt& s : body) {
      if (const auto* d = s.as<Decl>(); d && d->array_length) out.push_back(s);
    }
    for (int k = 0; k < c_; ++k) {
      out.push_back(Stmt{If{build::binary(BinaryOp::Lt, index(k), bound), lane_block(body, k), {}}});
    }
  }

  void emit_a_form(Block& out) const {
    const For& loop = *in_.body[grid_->index].as<For>();
    if (!uniform(grid_->bound)) fail("the grid-stride loop bound must not depend on the work-item");
    for (std::size_t i = 0; i < in_.body.size(); ++i) {
      if (i != grid_->index) {
        out.push_back(map_outer(in_.body[i]));
        continue;
      }
      const std::int64_t step = gapped_ ? 1 : grid_->factor * c_;
      Expr init = step == 1 ? call0("get_global_id") : mul(call0("get_global_id"), build::int_lit(step));
      Expr stride = step == 1 ? call0("get_global_size") : mul(call0("get_global_size"), build::int_lit(step));
      Expr bound = gapped_ ? build::var(gl_name_) : lane_expr(grid_->bound, 0);
      Decl index{grid_->var_type, grid_->var, std::nullopt, std::move(init)};

      Block body;
      for (int k = 0; k < c_; ++k) {
        Expr offset = gapped_ ? mul(build::var(gl_name_), build::int_lit(k)) : build::int_lit(grid_->factor * k);
        body.push_back(Stmt{Decl{grid_->var_type, lane_name(grid_->var, k), std::nullopt,
                                 add(build::var(grid_->var), std::move(offset))}});
      }
      if (cfg_.tail_policy == TailPolicy::GuardTails) {
        const Expr limit = gapped_ ? build::var(*cfg_.extent_param) : lane_expr(grid_->bound, 0);
        guarded_lanes(
            loop.body, [&](int k) { return build::var(lane_name(grid_->var, k)); }, limit, body);
      } else {
        for (Stmt& s : coarsen_block(loop.body)) body.push_back(std::move(s));
      }
      out.push_back(Stmt{For{Stmt{std::move(index)}, build::binary(BinaryOp::Lt, build::var(grid_->var), bound),
                             build::assign(grid_->var, AssignOp::Add, std::move(stride)), std::move(body)}});
    }
  }

  void emit_b_form(Block& out) const {
    if (cfg_.tail_policy == TailPolicy::GuardTails) {
      if (!cfg_.extent_param) throw Error(ErrorKind::InvalidSpec, "guard-tails requires an extent parameter");
      guarded_lanes(
          in_.body, [&](int k) { return lane_id(k); }, build::var(*cfg_.extent_param), out);
      return;
    }
    for (Stmt& s : coarsen_block(in_.body)) out.push_back(std::move(s));
  }

  // Statements outside the grid loop run once per merged work-item.
  Stmt map_outer(const Stmt& s) const {
    if (s.as<Barrier>()) return s;
    if (const auto* d = s.as<Decl>(); d && d->array_length) return s;
    if (const auto* n = s.as<Nested>()) {
      Block body;
      for (const Stmt& x : n->body) body.push_back(map_outer(x));
      return Stmt{Nested{std::move(body)}};
    }
    if (const auto* i = s.as<If>()) {
      Block then_body, else_body;
      for (const Stmt& x : i->then_body) then_body.push_back(map_outer(x));
      for (const Stmt& x : i->else_body) else_body.push_back(map_outer(x));
      return Stmt{If{lane_expr(i->cond, 0), std::move(then_body), std::move(else_body)}};
    }
    if (const auto* f = s.as<For>()) {
      Block body;
      for (const Stmt& x : f->body) body.push_back(map_outer(x));
      return Stmt{For{lane_stmt(*f->init, 0), lane_expr(f->cond, 0), lane_stmt(*f->step, 0), std::move(body)}};
    }
    return lane_stmt(s, 0);
  }

  std::optional<std::string> obligation() const {
    if (cfg_.tail_policy != TailPolicy::RequireDivisible) return std::nullopt;
    if (gapped_) return "requires: " + *cfg_.extent_param + " % " + std::to_string(c_) + " == 0";
    if (!grid_) return std::nullopt;
    const Expr check = build::binary(BinaryOp::Eq,
                                     build::binary(BinaryOp::Rem, grid_->bound, build::int_lit(grid_->factor * c_)),
                                     build::int_lit(0));
    return "requires: " + print(check);
  }

  const Kernel& in_;
  CoarsenConfig cfg_;
  int c_;
  bool gapped_;
  std::optional<GridLoop> grid_;
  std::set<std::string> taken_;
  std::set<std::string> priv_;
  std::map<std::string, std::string> separator_;
  std::set<const For*> uniform_loops_;
  std::string gl_name_;
};

}  // namespace

Kernel coarsen(const Kernel& kernel, const CoarsenConfig& config) {
  if (config.degree < 1) throw Error(ErrorKind::InvalidSpec, "coarsening degree must be positive");
  if (config.degree == 1) return kernel;
  return Coarsener(kernel, config).run();
}

Kernel emit_simd(const Kernel& kernel, int lanes) {
  if (lanes < 1) throw Error(ErrorKind::InvalidSpec, "SIMD lane count must be positive");
  std::string offending;
  for (const BranchLabel& l : classify_divergence(kernel)) {
    if (l.construct == "if" && l.id_dependent) offending += (offending.empty() ? "" : "; ") + ("if (" + l.condition + ")");
  }
  if (!offending.empty()) fail("work-item-id-dependent branch prevents SIMD vectorization: " + offending);
  Kernel out = kernel;
  out.attributes.simd_lanes = lanes;
  return out;
}

Kernel emit_replication(const Kernel& kernel, int units) {
  if (units < 1) throw Error(ErrorKind::InvalidSpec, "compute unit count must be positive");
  Kernel out = kernel;
  if (units == 1) out.attributes.compute_units.reset();
  else out.attributes.compute_units = units;
  return out;
}

}  // namespace thc
