#include "thc/lsu.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "json.hpp"
#include "thc/parser.hpp"

namespace thc {

const char* to_string(IndexClass c) {
  switch (c) {
    case IndexClass::ContiguousAffine: return "contiguous-affine";
    case IndexClass::StridedAffine: return "strided-affine";
    case IndexClass::LaneClustered: return "lane-clustered-contiguous";
    case IndexClass::DataDependent: return "data-dependent";
  }
  return "?";
}

const char* to_string(LsuKind k) { return k == LsuKind::BurstCoalesced ? "burst-coalesced" : "prefetching"; }

namespace {

// coef * id + sum(terms) + constant, where id is the work-item index.
struct Affine {
  bool known = true;
  bool data = false;     // built from a loaded value
  bool varying = true;   // unknown values only: may depend on the work-item id
  std::int64_t coef = 0;
  std::map<std::string, std::int64_t> terms;
  std::int64_t constant = 0;

  static Affine unknown(bool data) {
    Affine a;
    a.known = false;
    a.data = data;
    return a;
  }
  bool is_constant() const { return known && coef == 0 && terms.empty(); }
  void normalise() {
    std::erase_if(terms, [](const auto& t) { return t.second == 0; });
  }
};

Affine combine(const Affine& a, const Affine& b, std::int64_t sign) {
  if (!a.known || !b.known) return Affine::unknown(a.data || b.data);
  Affine r = a;
  r.coef += sign * b.coef;
  r.constant += sign * b.constant;
  for (const auto& [k, v] : b.terms) r.terms[k] += sign * v;
  r.normalise();
  return r;
}

Affine scale(const Affine& a, std::int64_t f) {
  if (!a.known) return a;
  Affine r = a;
  r.coef *= f;
  r.constant *= f;
  for (auto& [k, v] : r.terms) v *= f;
  r.normalise();
  return r;
}

bool contains_load(const Expr& e) {
  if (e.as<ArrayLoad>()) return true;
  if (const auto* u = e.as<Unary>()) return contains_load(*u->operand);
  if (const auto* b = e.as<Binary>()) return contains_load(*b->lhs) || contains_load(*b->rhs);
  if (const auto* c = e.as<Call>()) {
    return std::any_of(c->args.begin(), c->args.end(), [](const Expr& x) { return contains_load(x); });
  }
  return false;
}

bool is_call(const Expr& e, std::string_view callee) {
  const auto* c = e.as<Call>();
  return c && c->callee == callee;
}

std::optional<std::int64_t> id_factor(const Expr& e, std::string_view callee) {
  if (is_call(e, callee)) return 1;
  const auto* b = e.as<Binary>();
  if (!b || b->op != BinaryOp::Mul || !is_call(*b->lhs, callee)) return std::nullopt;
  const auto* lit = b->rhs->as<IntLiteral>();
  if (!lit || lit->value <= 0) return std::nullopt;
  return lit->value;
}

struct Site {
  AccessPattern pattern;
  Affine index;
  int region = 0;
};

class Collector {
 public:
  Collector(const Kernel& k, std::vector<BranchLabel> labels) : kernel_(k), labels_(std::move(labels)) {
    for (const Param& p : k.params) {
      if (p.type.pointer && p.type.space != AddressSpace::Local) globals_.insert(p.name);
      if (!p.type.pointer) env_[p.name] = symbol(p.name);
    }
    find_assigned(k.body);
  }

  void run() { block(kernel_.body, 0, Divergence::None); }

  std::vector<Site> sites;

 private:
  static Affine symbol(const std::string& name) {
    Affine a;
    a.terms[name] = 1;
    return a;
  }

  void find_assigned(const Block& b) {
    for (const Stmt& s : b) {
      if (const auto* a = s.as<Assign>()) assigned_.insert(a->target);
      else if (const auto* i = s.as<If>()) {
        find_assigned(i->then_body);
        find_assigned(i->else_body);
      } else if (const auto* f = s.as<For>()) {
        find_assigned(f->body);
        if (const auto* a = f->init->as<Assign>()) assigned_.insert(a->target);
      } else if (const auto* n = s.as<Nested>()) {
        find_assigned(n->body);
      }
    }
  }

  Affine affine(const Expr& e) const {
    if (const auto* lit = e.as<IntLiteral>()) {
      Affine a;
      a.constant = lit->value;
      return a;
    }
    if (const auto* v = e.as<VarRef>()) {
      auto it = env_.find(v->name);
      return it == env_.end() ? Affine::unknown(false) : it->second;
    }
    if (e.as<ArrayLoad>()) return Affine::unknown(true);
    return fold(e);
  }

  bool varying(const Expr& e) const {
    if (const auto* v = e.as<VarRef>()) {
      auto it = env_.find(v->name);
      if (it == env_.end()) return true;
      return it->second.known ? it->second.coef != 0 : it->second.varying;
    }
    if (const auto* c = e.as<Call>()) {
      if (c->callee == "get_global_id" || c->callee == "get_local_id") return true;
      return std::any_of(c->args.begin(), c->args.end(), [&](const Expr& x) { return varying(x); });
    }
    if (const auto* a = e.as<ArrayLoad>()) return varying(*a->index);
    if (const auto* u = e.as<Unary>()) return varying(*u->operand);
    if (const auto* b = e.as<Binary>()) return varying(*b->lhs) || varying(*b->rhs);
    return false;
  }

  Affine opaque(const Expr& e) const {
    Affine a = Affine::unknown(contains_load(e));
    a.varying = varying(e);
    return a;
  }

  Affine fold(const Expr& e) const {
    Affine a = fold_operators(e);
    return a.known ? a : opaque(e);
  }

  Affine fold_operators(const Expr& e) const {
    if (const auto* c = e.as<Call>()) {
      if (c->callee == "get_global_id" || c->callee == "get_local_id") {
        Affine a;
        a.coef = 1;
        return a;
      }
      if (is_work_item_builtin(c->callee)) return symbol(c->callee + "(0)");
      return Affine::unknown(contains_load(e));
    }
    if (const auto* u = e.as<Unary>()) {
      if (u->op == UnaryOp::Neg) return scale(affine(*u->operand), -1);
      return Affine::unknown(contains_load(e));
    }
    const auto& b = *e.as<Binary>();
    if (b.op == BinaryOp::Add) return combine(affine(*b.lhs), affine(*b.rhs), 1);
    if (b.op == BinaryOp::Sub) return combine(affine(*b.lhs), affine(*b.rhs), -1);
    if (b.op == BinaryOp::Mul) {
      const Affine l = affine(*b.lhs), r = affine(*b.rhs);
      if (l.is_constant() && r.known) return scale(r, l.constant);
      if (r.is_constant() && l.known) return scale(l, r.constant);
      // symbol * symbol stays symbolic only when neither side involves the id
      if (l.known && r.known && l.coef == 0 && r.coef == 0 && l.constant == 0 && r.constant == 0) {
        return symbol(print(e));
      }
    }
    return Affine::unknown(contains_load(e));
  }

  void record(const std::string& array, const Expr& index, bool store, int region, Divergence div) {
    if (!globals_.count(array)) return;
    Site s;
    s.pattern.pointer = array;
    s.pattern.is_store = store;
    s.pattern.divergence = div;
    s.pattern.index = print(index);
    s.index = affine(index);
    s.region = region;
    sites.push_back(std::move(s));
  }

  void expr(const Expr& e, int region, Divergence div) {
    if (const auto* a = e.as<ArrayLoad>()) {
      expr(*a->index, region, div);
      record(a->array, *a->index, false, region, div);
    } else if (const auto* u = e.as<Unary>()) {
      expr(*u->operand, region, div);
    } else if (const auto* b = e.as<Binary>()) {
      expr(*b->lhs, region, div);
      expr(*b->rhs, region, div);
    } else if (const auto* c = e.as<Call>()) {
      for (const Expr& x : c->args) expr(x, region, div);
    }
  }

  void block(const Block& b, int region, Divergence div) {
    for (const Stmt& s : b) stmt(s, region, div);
  }

  void stmt(const Stmt& s, int region, Divergence div) {
    if (const auto* d = s.as<Decl>()) {
      if (!d->init) return;
      expr(*d->init, region, div);
      if (d->type.scalar != ScalarType::Float && !assigned_.count(d->name)) {
        Affine a = affine(*d->init);
        // Uniform values the model cannot fold (such as N / C) become symbols.
        if (!a.known && !a.data && !a.varying) a = symbol(d->name);
        env_[d->name] = a;
      }
    } else if (const auto* a = s.as<Assign>()) {
      if (a->value) expr(*a->value, region, div);
    } else if (const auto* st = s.as<Store>()) {
      expr(st->index, region, div);
      expr(st->value, region, div);
      if (st->op != AssignOp::Set) record(st->array, st->index, false, region, div);
      record(st->array, st->index, true, region, div);
    } else if (const auto* i = s.as<If>()) {
      expr(i->cond, region, div);
      const BranchLabel& l = labels_.at(next_label_++);
      if (l.label == Divergence::None) {
        block(i->then_body, region, div);
        block(i->else_body, region, div);
      } else {
        block(i->then_body, ++regions_, l.label);
        block(i->else_body, ++regions_, l.label);
      }
    } else if (const auto* f = s.as<For>()) {
      loop_header(*f);
      const BranchLabel& l = labels_.at(next_label_++);
      expr(f->cond, region, div);
      if (l.label == Divergence::None || grid_loop(*f)) block(f->body, region, div);
      else block(f->body, ++regions_, l.label);
    } else if (const auto* n = s.as<Nested>()) {
      block(n->body, region, div);
    }
  }

  static bool grid_loop(const For& f) {
    const auto* init = f.init->as<Decl>();
    const auto* step = f.step->as<Assign>();
    if (!init || !init->init || !step || step->target != init->name || !step->value) return false;
    const auto a = id_factor(*init->init, "get_global_id");
    return a && step->op == AssignOp::Add && id_factor(*step->value, "get_global_size") == a;
  }

  void loop_header(const For& f) {
    const auto* init = f.init->as<Decl>();
    if (!init || !init->init) return;
    if (grid_loop(f)) {
      Affine a;
      a.coef = *id_factor(*init->init, "get_global_id");
      env_[init->name] = a;
      return;
    }
    const auto* step = f.step->as<Assign>();
    const bool serial = step && (step->op == AssignOp::Inc || (step->op == AssignOp::Add && step->value &&
                                                               step->value->as<IntLiteral>() &&
                                                               step->value->as<IntLiteral>()->value == 1));
    if (serial && affine(*init->init).is_constant()) {
      env_[init->name] = symbol(init->name);
      counters_.insert(init->name);
    } else {
      env_.erase(init->name);
    }
  }

 public:
  std::set<std::string> counters_;

 private:
  const Kernel& kernel_;
  std::vector<BranchLabel> labels_;
  std::size_t next_label_ = 0;
  int regions_ = 0;
  std::set<std::string> globals_;
  std::set<std::string> assigned_;
  std::map<std::string, Affine> env_;
};

struct GroupKey {
  std::string pointer;
  bool is_store;
  int region;
  auto operator<=>(const GroupKey&) const = default;
};

}  // namespace

LsuReport analyze(const Kernel& kernel, const LsuModel& model) {
  Collector col(kernel, classify_divergence(kernel));
  col.run();
  std::vector<Site>& sites = col.sites;

  std::map<GroupKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    groups[{sites[i].pattern.pointer, sites[i].pattern.is_store, sites[i].region}].push_back(i);
  }

  std::vector<LsuEntry> raw;
  auto emit = [&](const Site& s, LsuKind kind, int count, int width, bool cached) {
    raw.push_back(LsuEntry{s.pattern.pointer, s.pattern.is_store, kind, count, width, cached,
                           cached ? model.cache_bits : 0});
  };

  for (const auto& [key, members] : groups) {
    // Affine sites keyed by id coefficient and symbolic part.
    std::map<std::pair<std::int64_t, std::map<std::string, std::int64_t>>, std::vector<std::size_t>> affine;
    std::map<std::int64_t, std::set<std::map<std::string, std::int64_t>>> signatures;
    for (std::size_t i : members) {
      Site& s = sites[i];
      if (!s.index.known) {
        s.pattern.index_class = IndexClass::DataDependent;
        emit(s, LsuKind::BurstCoalesced, 1, 32, true);
        continue;
      }
      std::map<std::string, std::int64_t> sym;
      for (const auto& [name, v] : s.index.terms) {
        if (!col.counters_.count(name)) sym[name] = v;
      }
      signatures[s.index.coef].insert(sym);
      affine[{s.index.coef, s.index.terms}].push_back(i);
    }
    for (const auto& [sig, idx] : affine) {
      const std::int64_t coef = sig.first;
      if (signatures[coef].size() > 1) {
        // Accesses a symbolic distance apart, as after gapped coarsening.
        for (std::size_t i : idx) {
          sites[i].pattern.index_class = IndexClass::StridedAffine;
          emit(sites[i], LsuKind::BurstCoalesced, 1, 32, true);
        }
        continue;
      }
      if (coef <= 1) {
        for (std::size_t i : idx) {
          Site& s = sites[i];
          bool serial = false;
          for (const auto& [name, v] : s.index.terms) serial = serial || (col.counters_.count(name) && v == 1);
          s.pattern.index_class = IndexClass::ContiguousAffine;
          const bool prefetch = coef == 0 && serial && !s.pattern.is_store && s.region == 0;
          emit(s, prefetch ? LsuKind::Prefetching : LsuKind::BurstCoalesced, 1, 32, false);
        }
        continue;
      }
      // coef m >= 2: m sites at consecutive constants form one lane cluster.
      std::multimap<std::int64_t, std::size_t> by_const;
      for (std::size_t i : idx) by_const.emplace(sites[i].index.constant, i);
      while (!by_const.empty()) {
        const std::int64_t start = by_const.begin()->first;
        bool full = true;
        for (std::int64_t d = 0; d < coef && full; ++d) full = by_const.count(start + d) > 0;
        if (!full) {
          const std::size_t i = by_const.begin()->second;
          by_const.erase(by_const.begin());
          sites[i].pattern.index_class = IndexClass::StridedAffine;
          emit(sites[i], LsuKind::BurstCoalesced, 1, 32, false);
          continue;
        }
        std::size_t first = 0;
        for (std::int64_t d = 0; d < coef; ++d) {
          auto it = by_const.find(start + d);
          sites[it->second].pattern.index_class = IndexClass::LaneClustered;
          if (d == 0) first = it->second;
          by_const.erase(it);
        }
        const std::int64_t bits = 64 * coef;
        const int units = static_cast<int>((bits + model.max_width_bits - 1) / model.max_width_bits);
        const int width = static_cast<int>(std::min<std::int64_t>(bits, model.max_width_bits));
        emit(sites[first], LsuKind::BurstCoalesced, units, width, false);
      }
    }
  }

  std::sort(raw.begin(), raw.end(), [](const LsuEntry& a, const LsuEntry& b) {
    return std::tie(a.pointer, a.is_store, a.kind, b.width_bits, a.cached) <
           std::tie(b.pointer, b.is_store, b.kind, a.width_bits, b.cached);
  });
  LsuReport report;
  report.kernel = kernel.name;
  for (const LsuEntry& e : raw) {
    if (!report.lsus.empty()) {
      LsuEntry& last = report.lsus.back();
      if (last.pointer == e.pointer && last.is_store == e.is_store && last.kind == e.kind &&
          last.width_bits == e.width_bits && last.cached == e.cached) {
        last.count += e.count;
        continue;
      }
    }
    report.lsus.push_back(e);
  }
  for (const Site& s : sites) report.accesses.push_back(s.pattern);
  return report;
}

std::string to_json(const LsuReport& report) {
  nlohmann::ordered_json j;
  j["model_version"] = kLsuModelVersion;
  j["kernel"] = report.kernel;
  j["lsus"] = nlohmann::ordered_json::array();
  for (const LsuEntry& e : report.lsus) {
    nlohmann::ordered_json x;
    x["pointer"] = e.pointer;
    x["direction"] = e.is_store ? "store" : "load";
    x["kind"] = to_string(e.kind);
    x["count"] = e.count;
    x["width_bits"] = e.width_bits;
    x["cached"] = e.cached;
    x["cache_bits"] = e.cache_bits;
    j["lsus"].push_back(std::move(x));
  }
  return j.dump(2) + "\n";
}

}  // namespace thc
