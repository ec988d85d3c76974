#include "thc/interp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "thc/error.hpp"
#include "thc/typing.hpp"

namespace thc {

// ---- value helpers ---------------------------------------------------------

std::size_t LaunchConfig::effective_local_size() const {
  return local_size != 0 ? local_size : std::min<std::size_t>(global_size, 256);
}

void LaunchConfig::validate() const {
  if (global_size == 0) throw Error(ErrorKind::Precondition, "global size must be positive");
  if (global_size > std::numeric_limits<std::int32_t>::max()) {
    throw Error(ErrorKind::Precondition, "global size exceeds the 32-bit id range");
  }
  const std::size_t l = effective_local_size();
  if (l == 0 || global_size % l != 0) {
    throw Error(ErrorKind::Precondition, "local size " + std::to_string(l) + " does not divide global size " +
                                             std::to_string(global_size));
  }
}

Buffer Buffer::zeros(ScalarType type, std::size_t length) { return Buffer{type, std::vector<std::uint32_t>(length, 0)}; }

Buffer Buffer::of_floats(std::span<const float> values) {
  Buffer b{ScalarType::Float, {}};
  b.words.reserve(values.size());
  for (float v : values) b.words.push_back(std::bit_cast<std::uint32_t>(v));
  return b;
}

Buffer Buffer::of_ints(std::span<const std::int32_t> values) {
  Buffer b{ScalarType::Int, {}};
  b.words.reserve(values.size());
  for (std::int32_t v : values) b.words.push_back(static_cast<std::uint32_t>(v));
  return b;
}

Buffer Buffer::of_uints(std::span<const std::uint32_t> values) {
  return Buffer{ScalarType::Uint, std::vector<std::uint32_t>(values.begin(), values.end())};
}

float Buffer::as_float(std::size_t i) const { return std::bit_cast<float>(words.at(i)); }
std::int32_t Buffer::as_int(std::size_t i) const { return static_cast<std::int32_t>(words.at(i)); }

std::string Buffer::element_text(std::size_t i) const {
  std::ostringstream os;
  switch (type) {
    case ScalarType::Int: os << as_int(i); break;
    case ScalarType::Uint: os << words.at(i); break;
    case ScalarType::Float:
      os.precision(9);
      os << as_float(i) << " (0x" << std::hex << words.at(i) << ")";
      break;
  }
  return os.str();
}

ScalarValue ScalarValue::of_int(std::int32_t v) { return {ScalarType::Int, static_cast<std::uint32_t>(v)}; }
ScalarValue ScalarValue::of_uint(std::uint32_t v) { return {ScalarType::Uint, v}; }
ScalarValue ScalarValue::of_float(float v) { return {ScalarType::Float, std::bit_cast<std::uint32_t>(v)}; }

namespace {

inline float F(std::uint32_t bits) { return std::bit_cast<float>(bits); }
inline std::uint32_t B(float v) { return std::bit_cast<std::uint32_t>(v); }
inline std::int32_t I(std::uint32_t bits) { return static_cast<std::int32_t>(bits); }

std::uint32_t float_to_int_bits(float v, bool to_unsigned) {
  // Out-of-range conversions are undefined in C; saturate so runs stay deterministic.
  if (std::isnan(v)) return 0;
  if (to_unsigned) {
    if (v <= 0.0f) return 0;
    if (v >= 4294967296.0f) return 0xFFFFFFFFu;
    return static_cast<std::uint32_t>(v);
  }
  if (v <= -2147483648.0f) return 0x80000000u;
  if (v >= 2147483648.0f) return 0x7FFFFFFFu;
  return static_cast<std::uint32_t>(static_cast<std::int32_t>(v));
}

std::uint32_t convert_bits(std::uint32_t bits, ScalarType from, ScalarType to) {
  if (from == to) return bits;
  if (to == ScalarType::Float) {
    return from == ScalarType::Int ? B(static_cast<float>(I(bits))) : B(static_cast<float>(bits));
  }
  if (from == ScalarType::Float) return float_to_int_bits(F(bits), to == ScalarType::Uint);
  return bits;  // int <-> uint keeps the bit pattern
}

enum class Op : std::uint8_t {
  Mov,
  AddI, SubI, MulI, DivI, RemI, DivU, RemU,
  AddF, SubF, MulF, DivF,
  LtI, LeI, GtI, GeI, LtU, LeU, GtU, GeU, EqI, NeI,
  LtF, LeF, GtF, GeF, EqF, NeF,
  NegI, NegF,
  I2F, U2F, F2I, F2U,
  MinI, MaxI, MinU, MaxU, MinF, MaxF, FAbs, Sqrt,
  LoadG, StoreG, LoadL, StoreL,
  Jmp, Jz, Jnz,
  Barrier, End,
};

struct Instr {
  Op op;
  std::uint32_t dst = 0;
  std::uint32_t a = 0;
  std::uint32_t b = 0;
};

enum BuiltinSlot : std::uint32_t { kGlobalId = 0, kGlobalSize, kLocalId, kLocalSize, kGroupId, kBuiltinCount };

struct Value {
  std::uint32_t slot;
  ScalarType type;
};

}  // namespace

struct Program::Impl {
  Kernel kernel;
  std::vector<Instr> code;
  std::vector<std::uint32_t> frame_template;

  struct ScalarParam {
    std::string name;
    ScalarType type;
    std::uint32_t slot;
  };
  std::vector<ScalarParam> scalar_params;

  struct GlobalArray {
    std::string name;
    ScalarType type;
  };
  std::vector<GlobalArray> globals;

  struct LocalArray {
    std::string name;
    ScalarType type;
    std::size_t length;  // 0 for __local pointer params (length comes from the BufferSet)
  };
  std::vector<LocalArray> locals;
  bool has_barrier = false;

  // ---- compilation -------------------------------------------------------

  struct VarInfo {
    std::uint32_t slot;
    ScalarType type;
  };
  struct ArrayRef {
    bool local;
    std::uint32_t id;
    ScalarType type;
  };
  std::vector<std::map<std::string, VarInfo, std::less<>>> scopes;
  std::map<std::string, ArrayRef, std::less<>> arrays;
  std::map<std::pair<ScalarType, std::uint32_t>, std::uint32_t> constants;

  explicit Impl(const Kernel& k) : kernel(k) {
    frame_template.assign(kBuiltinCount, 0);
    scopes.emplace_back();
    for (const Param& p : kernel.params) {
      if (p.type.pointer) {
        if (p.type.space == AddressSpace::Local) {
          arrays[p.name] = ArrayRef{true, static_cast<std::uint32_t>(locals.size()), p.type.scalar};
          locals.push_back(LocalArray{p.name, p.type.scalar, 0});
        } else {
          arrays[p.name] = ArrayRef{false, static_cast<std::uint32_t>(globals.size()), p.type.scalar};
          globals.push_back(GlobalArray{p.name, p.type.scalar});
        }
      } else {
        const std::uint32_t slot = new_slot();
        scopes.back()[p.name] = VarInfo{slot, p.type.scalar};
        scalar_params.push_back(ScalarParam{p.name, p.type.scalar, slot});
      }
    }
    compile_block(kernel.body);
    emit(Op::End);
  }

  std::uint32_t new_slot() {
    frame_template.push_back(0);
    return static_cast<std::uint32_t>(frame_template.size() - 1);
  }

  std::uint32_t constant(ScalarType type, std::uint32_t bits) {
    auto [it, inserted] = constants.try_emplace({type, bits}, 0);
    if (inserted) {
      it->second = new_slot();
      frame_template[it->second] = bits;
    }
    return it->second;
  }
  Value int_const(std::int32_t v) { return {constant(ScalarType::Int, static_cast<std::uint32_t>(v)), ScalarType::Int}; }

  std::size_t emit(Op op, std::uint32_t dst = 0, std::uint32_t a = 0, std::uint32_t b = 0) {
    code.push_back(Instr{op, dst, a, b});
    return code.size() - 1;
  }
  std::uint32_t here() const { return static_cast<std::uint32_t>(code.size()); }
  void patch(std::size_t at, std::uint32_t target) {
    if (code[at].op == Op::Jmp) code[at].dst = target;
    else code[at].a = target;
  }

  const VarInfo& lookup(const std::string& name) const {
    for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
      auto f = it->find(name);
      if (f != it->end()) return f->second;
    }
    throw Error(ErrorKind::Semantic, "use of undeclared identifier '" + name + "'");
  }

  const ArrayRef& array(const std::string& name) const {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw Error(ErrorKind::Semantic, "'" + name + "' is not an array");
    return it->second;
  }

  // Converts v to `to`, writing into dst when given.
  Value convert(Value v, ScalarType to, std::optional<std::uint32_t> dst = std::nullopt) {
    if (v.type == to || (v.type != ScalarType::Float && to != ScalarType::Float)) {
      if (dst && *dst != v.slot) emit(Op::Mov, *dst, v.slot);
      return {dst.value_or(v.slot), to};
    }
    const std::uint32_t out = dst.value_or(new_slot());
    Op op;
    if (to == ScalarType::Float) op = v.type == ScalarType::Int ? Op::I2F : Op::U2F;
    else op = to == ScalarType::Int ? Op::F2I : Op::F2U;
    emit(op, out, v.slot);
    return {out, to};
  }

  static Op arith_op(BinaryOp op, ScalarType t) {
    const bool f = t == ScalarType::Float;
    const bool u = t == ScalarType::Uint;
    switch (op) {
      case BinaryOp::Add: return f ? Op::AddF : Op::AddI;
      case BinaryOp::Sub: return f ? Op::SubF : Op::SubI;
      case BinaryOp::Mul: return f ? Op::MulF : Op::MulI;
      case BinaryOp::Div: return f ? Op::DivF : (u ? Op::DivU : Op::DivI);
      case BinaryOp::Rem: return u ? Op::RemU : Op::RemI;
      case BinaryOp::Lt: return f ? Op::LtF : (u ? Op::LtU : Op::LtI);
      case BinaryOp::Le: return f ? Op::LeF : (u ? Op::LeU : Op::LeI);
      case BinaryOp::Gt: return f ? Op::GtF : (u ? Op::GtU : Op::GtI);
      case BinaryOp::Ge: return f ? Op::GeF : (u ? Op::GeU : Op::GeI);
      case BinaryOp::Eq: return f ? Op::EqF : Op::EqI;
      case BinaryOp::Ne: return f ? Op::NeF : Op::NeI;
      default: break;
    }
    throw Error(ErrorKind::Semantic, "bad binary operator");
  }

  static BinaryOp compound_op(AssignOp op) {
    switch (op) {
      case AssignOp::Add:
      case AssignOp::Inc: return BinaryOp::Add;
      case AssignOp::Sub:
      case AssignOp::Dec: return BinaryOp::Sub;
      case AssignOp::Mul: return BinaryOp::Mul;
      default: return BinaryOp::Div;
    }
  }

  // Slot that is non-zero iff the expression is true.
  std::uint32_t truth(const Expr& e) {
    Value v = compile(e);
    if (v.type != ScalarType::Float) return v.slot;
    const std::uint32_t out = new_slot();
    emit(Op::NeF, out, v.slot, constant(ScalarType::Float, 0));
    return out;
  }

  Value binary_into(BinaryOp op, Value lhs, Value rhs, std::optional<std::uint32_t> dst) {
    const ScalarType t = promote(lhs.type, rhs.type);
    lhs = convert(lhs, t);
    rhs = convert(rhs, t);
    const std::uint32_t out = dst.value_or(new_slot());
    emit(arith_op(op, t), out, lhs.slot, rhs.slot);
    return {out, is_arithmetic(op) ? t : ScalarType::Int};
  }

  Value compile(const Expr& e, std::optional<std::uint32_t> dst = std::nullopt) {
    if (const auto* lit = e.as<IntLiteral>()) {
      const ScalarType t = lit->is_unsigned ? ScalarType::Uint : ScalarType::Int;
      return {constant(t, static_cast<std::uint32_t>(lit->value)), t};
    }
    if (const auto* f = e.as<FloatLiteral>()) return {constant(ScalarType::Float, B(f->value)), ScalarType::Float};
    if (const auto* v = e.as<VarRef>()) {
      const VarInfo& info = lookup(v->name);
      return {info.slot, info.type};
    }
    if (const auto* a = e.as<ArrayLoad>()) {
      const ArrayRef& arr = array(a->array);
      Value idx = compile(*a->index);
      const std::uint32_t out = dst.value_or(new_slot());
      emit(arr.local ? Op::LoadL : Op::LoadG, out, arr.id, idx.slot);
      return {out, arr.type};
    }
    if (const auto* u = e.as<Unary>()) {
      Value v = compile(*u->operand);
      const std::uint32_t out = dst.value_or(new_slot());
      if (u->op == UnaryOp::Neg) {
        emit(v.type == ScalarType::Float ? Op::NegF : Op::NegI, out, v.slot);
        return {out, v.type};
      }
      if (v.type == ScalarType::Float) emit(Op::EqF, out, v.slot, constant(ScalarType::Float, 0));
      else emit(Op::EqI, out, v.slot, int_const(0).slot);
      return {out, ScalarType::Int};
    }
    if (const auto* b = e.as<Binary>()) {
      if (b->op == BinaryOp::LogicalAnd || b->op == BinaryOp::LogicalOr) {
        const bool is_and = b->op == BinaryOp::LogicalAnd;
        const std::uint32_t out = new_slot();
        emit(Op::Mov, out, int_const(is_and ? 0 : 1).slot);
        const std::uint32_t lhs = truth(*b->lhs);
        const std::size_t jump = emit(is_and ? Op::Jz : Op::Jnz, lhs, 0);
        const std::uint32_t rhs = truth(*b->rhs);
        emit(Op::NeI, out, rhs, int_const(0).slot);
        patch(jump, here());
        if (dst) emit(Op::Mov, *dst, out);
        return {dst.value_or(out), ScalarType::Int};
      }
      Value lhs = compile(*b->lhs);
      Value rhs = compile(*b->rhs);
      return binary_into(b->op, lhs, rhs, dst);
    }
    const auto& c = *e.as<Call>();
    if (is_work_item_builtin(c.callee)) {
      const std::int64_t dim = c.args.at(0).as<IntLiteral>()->value;
      std::uint32_t slot;
      if (c.callee == "get_global_id") slot = dim == 0 ? kGlobalId : int_const(0).slot;
      else if (c.callee == "get_global_size") slot = dim == 0 ? kGlobalSize : int_const(1).slot;
      else if (c.callee == "get_local_id") slot = dim == 0 ? kLocalId : int_const(0).slot;
      else if (c.callee == "get_local_size") slot = dim == 0 ? kLocalSize : int_const(1).slot;
      else slot = dim == 0 ? kGroupId : int_const(0).slot;
      return {slot, ScalarType::Int};
    }
    if (c.callee == "min" || c.callee == "max") {
      Value x = compile(c.args.at(0));
      Value y = compile(c.args.at(1));
      const ScalarType t = promote(x.type, y.type);
      x = convert(x, t);
      y = convert(y, t);
      const bool is_min = c.callee == "min";
      Op op = t == ScalarType::Float ? (is_min ? Op::MinF : Op::MaxF)
              : t == ScalarType::Uint ? (is_min ? Op::MinU : Op::MaxU)
                                      : (is_min ? Op::MinI : Op::MaxI);
      const std::uint32_t out = dst.value_or(new_slot());
      emit(op, out, x.slot, y.slot);
      return {out, t};
    }
    Value x = convert(compile(c.args.at(0)), ScalarType::Float);
    const std::uint32_t out = dst.value_or(new_slot());
    emit(c.callee == "fabs" ? Op::FAbs : Op::Sqrt, out, x.slot);
    return {out, ScalarType::Float};
  }

  // Evaluates e and stores it, converted, into a variable slot.
  void compile_into(const VarInfo& target, const Expr& e) {
    // Writing straight into the target is safe only for single-instruction results.
    const bool direct = !e.as<VarRef>() && !e.as<IntLiteral>() && !e.as<FloatLiteral>() &&
                        !(e.as<Binary>() && (e.as<Binary>()->op == BinaryOp::LogicalAnd ||
                                             e.as<Binary>()->op == BinaryOp::LogicalOr));
    if (direct) {
      const ScalarType natural = expr_type(e);
      if (natural == target.type || (natural != ScalarType::Float && target.type != ScalarType::Float)) {
        const Value v = compile(e, target.slot);
        if (v.slot != target.slot) emit(Op::Mov, target.slot, v.slot);
        return;
      }
    }
    convert(compile(e), target.type, target.slot);
  }

  ScalarType expr_type(const Expr& e) const {
    if (const auto* lit = e.as<IntLiteral>()) return lit->is_unsigned ? ScalarType::Uint : ScalarType::Int;
    if (e.as<FloatLiteral>()) return ScalarType::Float;
    if (const auto* v = e.as<VarRef>()) return lookup(v->name).type;
    if (const auto* a = e.as<ArrayLoad>()) return array(a->array).type;
    if (const auto* u = e.as<Unary>()) return u->op == UnaryOp::Not ? ScalarType::Int : expr_type(*u->operand);
    if (const auto* b = e.as<Binary>()) {
      return is_arithmetic(b->op) ? promote(expr_type(*b->lhs), expr_type(*b->rhs)) : ScalarType::Int;
    }
    const auto& c = *e.as<Call>();
    if (c.callee == "fabs" || c.callee == "sqrt") return ScalarType::Float;
    if (c.callee == "min" || c.callee == "max") return promote(expr_type(c.args[0]), expr_type(c.args[1]));
    return ScalarType::Int;
  }

  void compile_block(const Block& block) {
    for (const Stmt& s : block) compile_stmt(s);
  }

  void scoped(const Block& block) {
    scopes.emplace_back();
    compile_block(block);
    scopes.pop_back();
  }

  void compile_stmt(const Stmt& s) {
    if (const auto* d = s.as<Decl>()) {
      if (d->array_length) {
        arrays[d->name] = ArrayRef{true, static_cast<std::uint32_t>(locals.size()), d->type.scalar};
        locals.push_back(LocalArray{d->name, d->type.scalar, static_cast<std::size_t>(*d->array_length)});
        return;
      }
      VarInfo info{new_slot(), d->type.scalar};
      if (d->init) compile_into(info, *d->init);
      else emit(Op::Mov, info.slot, constant(d->type.scalar, 0));
      scopes.back()[d->name] = info;
    } else if (const auto* a = s.as<Assign>()) {
      const VarInfo info = lookup(a->target);
      if (a->op == AssignOp::Set) {
        compile_into(info, *a->value);
        return;
      }
      Value rhs = a->value ? compile(*a->value) : int_const(1);
      Value current{info.slot, info.type};
      const ScalarType t = promote(info.type, rhs.type);
      if (t == info.type) {
        binary_into(compound_op(a->op), current, rhs, info.slot);
      } else {
        Value r = binary_into(compound_op(a->op), current, rhs, std::nullopt);
        convert(r, info.type, info.slot);
      }
    } else if (const auto* st = s.as<Store>()) {
      const ArrayRef arr = array(st->array);
      Value idx = compile(st->index);
      Value val = compile(st->value);
      if (st->op != AssignOp::Set) {
        const std::uint32_t old = new_slot();
        emit(arr.local ? Op::LoadL : Op::LoadG, old, arr.id, idx.slot);
        val = binary_into(compound_op(st->op), Value{old, arr.type}, val, std::nullopt);
      }
      val = convert(val, arr.type);
      emit(arr.local ? Op::StoreL : Op::StoreG, arr.id, idx.slot, val.slot);
    } else if (const auto* i = s.as<If>()) {
      const std::uint32_t cond = truth(i->cond);
      const std::size_t to_else = emit(Op::Jz, cond, 0);
      scoped(i->then_body);
      if (i->else_body.empty()) {
        patch(to_else, here());
        return;
      }
      const std::size_t to_end = emit(Op::Jmp);
      patch(to_else, here());
      scoped(i->else_body);
      patch(to_end, here());
    } else if (const auto* f = s.as<For>()) {
      scopes.emplace_back();
      compile_stmt(*f->init);
      const std::uint32_t top = here();
      const std::uint32_t cond = truth(f->cond);
      const std::size_t exit = emit(Op::Jz, cond, 0);
      scoped(f->body);
      compile_stmt(*f->step);
      emit(Op::Jmp, top);
      patch(exit, here());
      scopes.pop_back();
    } else if (s.as<Barrier>()) {
      has_barrier = true;
      emit(Op::Barrier);
    } else if (const auto* n = s.as<Nested>()) {
      scoped(n->body);
    }
  }
};

namespace {

struct ArraySpan {
  std::uint32_t* data = nullptr;
  std::size_t size = 0;
  // Race tracking: 1 + writer id and the writer's phase, per element.
  std::uint32_t* writer = nullptr;
  std::uint32_t* phase = nullptr;
};

enum class Stop { Barrier, End };

// Mutable state of one launch.
struct Machine {
  const std::vector<Instr>& code;
  const std::vector<std::string>& global_names;
  const std::vector<std::string>& local_names;
  std::vector<ArraySpan> globals;
  std::vector<ArraySpan> locals;
  ExecStats stats;
  std::size_t local_size = 1;
  std::uint32_t group = 0;
  std::uint32_t phase = 0;
  std::uint32_t item = 0;  // global id of the running work-item

  [[noreturn]] void out_of_bounds(bool local, std::uint32_t array, std::uint32_t index, std::size_t size) const {
    std::ostringstream os;
    os << "work-item " << item << ": index " << I(index) << " out of bounds for "
       << (local ? "__local array '" + local_names[array] + "'" : "buffer '" + global_names[array] + "'")
       << " of length " << size;
    throw Error(ErrorKind::OutOfBounds, os.str());
  }

  void record_write(const ArraySpan& arr, std::uint32_t index, std::uint32_t writer, bool local,
                    std::uint32_t array_id) const {
    const std::uint32_t prev = arr.writer[index];
    if (prev != 0 && prev != writer + 1) {
      const std::uint32_t other = prev - 1;
      const bool same_group = local || other / local_size == item / local_size;
      if (!same_group || arr.phase[index] == phase) {
        std::ostringstream os;
        os << "work-items " << other << " and " << item << " both write "
           << (local ? local_names[array_id] : global_names[array_id]) << "[" << index << "]"
           << (same_group ? " in the same barrier phase" : " from different work-groups");
        throw Error(ErrorKind::DataRace, os.str());
      }
    }
    arr.writer[index] = writer + 1;
    arr.phase[index] = phase;
  }

  Stop execute(std::uint32_t* f, std::size_t& pc) {
    for (;;) {
      const Instr& in = code[pc++];
      switch (in.op) {
        case Op::Mov: f[in.dst] = f[in.a]; break;
        case Op::AddI: f[in.dst] = f[in.a] + f[in.b]; break;
        case Op::SubI: f[in.dst] = f[in.a] - f[in.b]; break;
        case Op::MulI: f[in.dst] = f[in.a] * f[in.b]; break;
        case Op::DivI: {
          const std::int32_t x = I(f[in.a]), y = I(f[in.b]);
          if (y == 0) throw Error(ErrorKind::DivisionByZero, "work-item " + std::to_string(item) + ": integer division by zero");
          f[in.dst] = (x == std::numeric_limits<std::int32_t>::min() && y == -1) ? f[in.a]
                                                                                 : static_cast<std::uint32_t>(x / y);
          break;
        }
        case Op::RemI: {
          const std::int32_t x = I(f[in.a]), y = I(f[in.b]);
          if (y == 0) throw Error(ErrorKind::DivisionByZero, "work-item " + std::to_string(item) + ": integer modulo by zero");
          f[in.dst] = (y == -1) ? 0u : static_cast<std::uint32_t>(x % y);
          break;
        }
        case Op::DivU:
          if (f[in.b] == 0) throw Error(ErrorKind::DivisionByZero, "work-item " + std::to_string(item) + ": integer division by zero");
          f[in.dst] = f[in.a] / f[in.b];
          break;
        case Op::RemU:
          if (f[in.b] == 0) throw Error(ErrorKind::DivisionByZero, "work-item " + std::to_string(item) + ": integer modulo by zero");
          f[in.dst] = f[in.a] % f[in.b];
          break;
        case Op::AddF: f[in.dst] = B(F(f[in.a]) + F(f[in.b])); ++stats.arithmetic; break;
        case Op::SubF: f[in.dst] = B(F(f[in.a]) - F(f[in.b])); ++stats.arithmetic; break;
        case Op::MulF: f[in.dst] = B(F(f[in.a]) * F(f[in.b])); ++stats.arithmetic; break;
        case Op::DivF: f[in.dst] = B(F(f[in.a]) / F(f[in.b])); ++stats.arithmetic; break;
        case Op::LtI: f[in.dst] = I(f[in.a]) < I(f[in.b]); break;
        case Op::LeI: f[in.dst] = I(f[in.a]) <= I(f[in.b]); break;
        case Op::GtI: f[in.dst] = I(f[in.a]) > I(f[in.b]); break;
        case Op::GeI: f[in.dst] = I(f[in.a]) >= I(f[in.b]); break;
        case Op::LtU: f[in.dst] = f[in.a] < f[in.b]; break;
        case Op::LeU: f[in.dst] = f[in.a] <= f[in.b]; break;
        case Op::GtU: f[in.dst] = f[in.a] > f[in.b]; break;
        case Op::GeU: f[in.dst] = f[in.a] >= f[in.b]; break;
        case Op::EqI: f[in.dst] = f[in.a] == f[in.b]; break;
        case Op::NeI: f[in.dst] = f[in.a] != f[in.b]; break;
        case Op::LtF: f[in.dst] = F(f[in.a]) < F(f[in.b]); break;
        case Op::LeF: f[in.dst] = F(f[in.a]) <= F(f[in.b]); break;
        case Op::GtF: f[in.dst] = F(f[in.a]) > F(f[in.b]); break;
        case Op::GeF: f[in.dst] = F(f[in.a]) >= F(f[in.b]); break;
        case Op::EqF: f[in.dst] = F(f[in.a]) == F(f[in.b]); break;
        case Op::NeF: f[in.dst] = F(f[in.a]) != F(f[in.b]); break;
        case Op::NegI: f[in.dst] = 0u - f[in.a]; break;
        case Op::NegF: f[in.dst] = f[in.a] ^ 0x80000000u; break;
        case Op::I2F: f[in.dst] = B(static_cast<float>(I(f[in.a]))); break;
        case Op::U2F: f[in.dst] = B(static_cast<float>(f[in.a])); break;
        case Op::F2I: f[in.dst] = float_to_int_bits(F(f[in.a]), false); break;
        case Op::F2U: f[in.dst] = float_to_int_bits(F(f[in.a]), true); break;
        case Op::MinI: f[in.dst] = I(f[in.b]) < I(f[in.a]) ? f[in.b] : f[in.a]; break;
        case Op::MaxI: f[in.dst] = I(f[in.a]) < I(f[in.b]) ? f[in.b] : f[in.a]; break;
        case Op::MinU: f[in.dst] = std::min(f[in.a], f[in.b]); break;
        case Op::MaxU: f[in.dst] = std::max(f[in.a], f[in.b]); break;
        case Op::MinF: f[in.dst] = F(f[in.b]) < F(f[in.a]) ? f[in.b] : f[in.a]; break;
        case Op::MaxF: f[in.dst] = F(f[in.a]) < F(f[in.b]) ? f[in.b] : f[in.a]; break;
        case Op::FAbs: f[in.dst] = f[in.a] & 0x7FFFFFFFu; break;
        case Op::Sqrt: f[in.dst] = B(std::sqrt(F(f[in.a]))); break;
        case Op::LoadG: {
          const ArraySpan& arr = globals[in.a];
          const std::uint32_t idx = f[in.b];
          if (idx >= arr.size) out_of_bounds(false, in.a, idx, arr.size);
          f[in.dst] = arr.data[idx];
          ++stats.loads;
          break;
        }
        case Op::StoreG: {
          const ArraySpan& arr = globals[in.dst];
          const std::uint32_t idx = f[in.a];
          if (idx >= arr.size) out_of_bounds(false, in.dst, idx, arr.size);
          record_write(arr, idx, item, false, in.dst);
          arr.data[idx] = f[in.b];
          ++stats.stores;
          break;
        }
        case Op::LoadL: {
          const ArraySpan& arr = locals[in.a];
          const std::uint32_t idx = f[in.b];
          if (idx >= arr.size) out_of_bounds(true, in.a, idx, arr.size);
          f[in.dst] = arr.data[idx];
          ++stats.local_loads;
          break;
        }
        case Op::StoreL: {
          const ArraySpan& arr = locals[in.dst];
          const std::uint32_t idx = f[in.a];
          if (idx >= arr.size) out_of_bounds(true, in.dst, idx, arr.size);
          record_write(arr, idx, item, true, in.dst);
          arr.data[idx] = f[in.b];
          ++stats.local_stores;
          break;
        }
        case Op::Jmp: pc = in.dst; break;
        case Op::Jz:
          if (f[in.dst] == 0) pc = in.a;
          break;
        case Op::Jnz:
          if (f[in.dst] != 0) pc = in.a;
          break;
        case Op::Barrier: return Stop::Barrier;
        case Op::End: return Stop::End;
      }
    }
  }
};

}  // namespace

Program::Program(const Kernel& kernel) : impl_(std::make_unique<Impl>(kernel)) {}
Program::~Program() = default;
Program::Program(Program&&) noexcept = default;
Program& Program::operator=(Program&&) noexcept = default;

const Kernel& Program::kernel() const { return impl_->kernel; }
std::size_t Program::instruction_count() const { return impl_->code.size(); }

ExecResult Program::run(const LaunchConfig& launch, BufferSet memory) const {
  launch.validate();
  const Impl& p = *impl_;
  const std::size_t global_size = launch.global_size;
  const std::size_t local_size = launch.effective_local_size();
  const std::size_t groups = global_size / local_size;

  std::vector<std::uint32_t> frame_template = p.frame_template;
  frame_template[kGlobalSize] = static_cast<std::uint32_t>(global_size);
  frame_template[kLocalSize] = static_cast<std::uint32_t>(local_size);
  for (const auto& sp : p.scalar_params) {
    auto it = memory.scalars.find(sp.name);
    if (it == memory.scalars.end()) throw Error(ErrorKind::Precondition, "no value for scalar parameter '" + sp.name + "'");
    frame_template[sp.slot] = convert_bits(it->second.bits, it->second.type, sp.type);
  }

  std::vector<std::string> global_names, local_names;
  std::vector<std::vector<std::uint32_t>> writer_store(p.globals.size()), phase_store(p.globals.size());
  std::vector<ArraySpan> globals;
  for (std::size_t i = 0; i < p.globals.size(); ++i) {
    const auto& g = p.globals[i];
    auto it = memory.buffers.find(g.name);
    if (it == memory.buffers.end()) throw Error(ErrorKind::Precondition, "no buffer for pointer parameter '" + g.name + "'");
    if (it->second.type != g.type) throw Error(ErrorKind::Precondition, "buffer '" + g.name + "' has the wrong element type");
    writer_store[i].assign(it->second.size(), 0);
    phase_store[i].assign(it->second.size(), 0);
    globals.push_back(ArraySpan{it->second.words.data(), it->second.size(), writer_store[i].data(), phase_store[i].data()});
    global_names.push_back(g.name);
  }

  std::vector<std::vector<std::uint32_t>> local_data(p.locals.size()), local_writer(p.locals.size()),
      local_phase(p.locals.size());
  std::vector<ArraySpan> locals;
  for (std::size_t i = 0; i < p.locals.size(); ++i) {
    const auto& l = p.locals[i];
    std::size_t length = l.length;
    if (length == 0) {
      auto it = memory.local_lengths.find(l.name);
      if (it == memory.local_lengths.end()) throw Error(ErrorKind::Precondition, "no length for __local parameter '" + l.name + "'");
      length = it->second;
    }
    local_data[i].assign(length, 0);
    local_writer[i].assign(length, 0);
    local_phase[i].assign(length, 0);
    locals.push_back(ArraySpan{local_data[i].data(), length, local_writer[i].data(), local_phase[i].data()});
    local_names.push_back(l.name);
  }

  Machine m{p.code, global_names, local_names, std::move(globals), std::move(locals), {}, local_size};

  std::vector<std::uint32_t> frames(p.has_barrier ? frame_template.size() * local_size : frame_template.size());
  std::vector<std::size_t> pcs(p.has_barrier ? local_size : 1);
  std::vector<Stop> stops(pcs.size());

  for (std::size_t n = 0; n < groups; ++n) {
    const std::size_t g = launch.reverse_group_order ? groups - 1 - n : n;
    m.group = static_cast<std::uint32_t>(g);
    m.phase = 0;
    for (std::size_t i = 0; i < local_data.size(); ++i) {
      std::fill(local_data[i].begin(), local_data[i].end(), 0u);
      std::fill(local_writer[i].begin(), local_writer[i].end(), 0u);
    }
    if (!p.has_barrier) {
      std::copy(frame_template.begin(), frame_template.end(), frames.begin());
      std::uint32_t* f = frames.data();
      f[kGroupId] = static_cast<std::uint32_t>(g);
      for (std::size_t l = 0; l < local_size; ++l) {
        m.item = static_cast<std::uint32_t>(g * local_size + l);
        f[kGlobalId] = m.item;
        f[kLocalId] = static_cast<std::uint32_t>(l);
        std::size_t pc = 0;
        m.execute(f, pc);
      }
      continue;
    }
    const std::size_t fs = frame_template.size();
    for (std::size_t l = 0; l < local_size; ++l) {
      std::uint32_t* f = frames.data() + l * fs;
      std::copy(frame_template.begin(), frame_template.end(), f);
      f[kGroupId] = static_cast<std::uint32_t>(g);
      f[kGlobalId] = static_cast<std::uint32_t>(g * local_size + l);
      f[kLocalId] = static_cast<std::uint32_t>(l);
      pcs[l] = 0;
    }
    for (;;) {
      for (std::size_t l = 0; l < local_size; ++l) {
        m.item = static_cast<std::uint32_t>(g * local_size + l);
        stops[l] = m.execute(frames.data() + l * fs, pcs[l]);
      }
      const bool all_end = std::all_of(stops.begin(), stops.end(), [](Stop s) { return s == Stop::End; });
      if (all_end) break;
      for (std::size_t l = 0; l < local_size; ++l) {
        if (stops[l] != Stop::Barrier || pcs[l] != pcs[0]) {
          std::ostringstream os;
          os << "work-group " << g << ": work-items " << g * local_size << " and " << g * local_size + l
             << " reach different barriers";
          throw Error(ErrorKind::BarrierDivergence, os.str());
        }
      }
      m.stats.barriers += local_size;
      ++m.phase;
    }
  }

  ExecResult result;
  result.stats = m.stats;
  for (std::size_t i = 0; i < p.globals.size(); ++i) {
    if (std::any_of(writer_store[i].begin(), writer_store[i].end(), [](std::uint32_t w) { return w != 0; })) {
      result.writers[p.globals[i].name] = std::move(writer_store[i]);
    }
  }
  result.memory = std::move(memory);
  return result;
}

ExecResult interpret(const Kernel& kernel, const LaunchConfig& launch, BufferSet memory) {
  return Program(kernel).run(launch, std::move(memory));
}

}  // namespace thc
