#include "thc/parser.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <set>

#include "thc/error.hpp"
#include "thc/typing.hpp"

namespace thc {
namespace {

struct Token {
  enum class Kind { Ident, Int, Float, Punct, End };
  Kind kind = Kind::End;
  std::string text;
  int line = 1;
  int col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run(std::vector<std::string>& notes) {
    std::vector<Token> out;
    bool leading = true;
    for (;;) {
      skip_space();
      if (at_end()) break;
      if (peek() == '/' && peek(1) == '/') {
        std::size_t start = pos_ + 2;
        while (!at_end() && peek() != '\n') advance();
        if (leading) {
          std::string text(src_.substr(start, pos_ - start));
          if (!text.empty() && text.front() == ' ') text.erase(0, 1);
          while (!text.empty() && (text.back() == '\r' || text.back() == ' ')) text.pop_back();
          notes.push_back(std::move(text));
        }
        continue;
      }
      if (peek() == '/' && peek(1) == '*') {
        int line = line_, col = col_;
        advance();
        advance();
        while (!at_end() && !(peek() == '*' && peek(1) == '/')) advance();
        if (at_end()) throw Error(ErrorKind::Syntax, "unterminated block comment", line, col);
        advance();
        advance();
        continue;
      }
      leading = false;
      out.push_back(next());
    }
    Token end;
    end.kind = Token::Kind::End;
    end.line = line_;
    end.col = col_;
    out.push_back(end);
    return out;
  }

 private:
  bool at_end() const { return pos_ >= src_.size(); }
  char peek(std::size_t ahead = 0) const { return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0'; }
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  void skip_space() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) advance();
  }

  Token next() {
    Token t;
    t.line = line_;
    t.col = col_;
    const std::size_t start = pos_;
    const char c = peek();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') advance();
      t.kind = Token::Kind::Ident;
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      lex_number(t);
    } else {
      static const char* kTwo[] = {"++", "--", "+=", "-=", "*=", "/=", "%=", "==", "!=", "<=",
                                   ">=", "&&", "||", "<<", ">>", "->", "&=", "|=", "^="};
      t.kind = Token::Kind::Punct;
      for (const char* two : kTwo) {
        if (peek() == two[0] && peek(1) == two[1]) {
          advance();
          advance();
          t.text = two;
          return t;
        }
      }
      static const std::string kOne = "(){}[];,+-*/%<>=!&|^~?:.#";
      if (kOne.find(c) == std::string::npos) {
        throw Error(ErrorKind::Syntax, std::string("unexpected character '") + c + "'", t.line, t.col);
      }
      advance();
    }
    t.text = std::string(src_.substr(start, pos_ - start));
    return t;
  }

  void lex_number(Token& t) {
    bool is_float = false;
    if (peek() == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
      advance();
      advance();
      while (std::isxdigit(static_cast<unsigned char>(peek()))) advance();
    } else {
      while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
      if (peek() == '.') {
        is_float = true;
        advance();
        while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
      }
      if (peek() == 'e' || peek() == 'E') {
        is_float = true;
        advance();
        if (peek() == '+' || peek() == '-') advance();
        if (!std::isdigit(static_cast<unsigned char>(peek()))) {
          throw Error(ErrorKind::Syntax, "malformed exponent", line_, col_);
        }
        while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
      }
    }
    if (is_float) {
      if (peek() == 'f' || peek() == 'F') advance();
    } else if (peek() == 'u' || peek() == 'U') {
      advance();
    }
    if (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') {
      throw Error(ErrorKind::Syntax, "invalid suffix on numeric literal", line_, col_);
    }
    t.kind = is_float ? Token::Kind::Float : Token::Kind::Int;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

const std::set<std::string, std::less<>> kUnsupportedKeywords = {
    "goto", "while", "do", "switch", "case", "return", "break", "continue", "struct", "union",
    "typedef", "enum", "sizeof", "static", "volatile", "inline"};

const std::set<std::string, std::less<>> kUnsupportedTypes = {
    "char", "uchar", "short", "ushort", "long", "ulong", "double", "half", "bool", "size_t",
    "float2", "float4", "float8", "float16", "int2", "int4", "int8", "int16", "uint2", "uint4", "void"};

class Parser {
 public:
  Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  Kernel parse_kernel() {
    Kernel k;
    parse_attributes(k);
    if (!(accept_ident("__kernel") || accept_ident("kernel"))) {
      if (kUnsupportedKeywords.count(cur().text)) fail(ErrorKind::Unsupported, "'" + cur().text + "' is not supported");
      if (check("#")) fail(ErrorKind::Unsupported, "preprocessor directives are not supported");
      fail(ErrorKind::Syntax, "expected '__kernel'");
    }
    parse_attributes(k);
    expect_ident("void", "kernel return type 'void'");
    k.name = expect_name("kernel name");
    expect("(");
    if (!check(")")) {
      do {
        k.params.push_back(parse_param());
      } while (accept(","));
    }
    expect(")");
    for (const Param& p : k.params) {
      if (!symbols_.declare(p.name, Symbol{p.type, p.type.pointer})) {
        fail(ErrorKind::Semantic, "duplicate parameter '" + p.name + "'");
      }
    }
    expect("{");
    symbols_.push();
    k.body = parse_block_items(/*kernel_scope=*/true);
    symbols_.pop();
    expect("}");
    if (cur().kind != Token::Kind::End) {
      fail(ErrorKind::Unsupported, "multiple kernels or trailing declarations in one file");
    }
    return k;
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  const Token& look(std::size_t n) const { return toks_[std::min(pos_ + n, toks_.size() - 1)]; }
  bool check(std::string_view p) const { return cur().kind == Token::Kind::Punct && cur().text == p; }
  bool check_ident(std::string_view id) const { return cur().kind == Token::Kind::Ident && cur().text == id; }
  bool accept(std::string_view p) {
    if (!check(p)) return false;
    ++pos_;
    return true;
  }
  bool accept_ident(std::string_view id) {
    if (!check_ident(id)) return false;
    ++pos_;
    return true;
  }

  [[noreturn]] void fail(ErrorKind kind, const std::string& msg) const { fail_at(kind, msg, cur()); }
  [[noreturn]] static void fail_at(ErrorKind kind, const std::string& msg, const Token& t) {
    throw Error(kind, msg, t.line, t.col);
  }

  static std::string describe(const Token& t) {
    return t.kind == Token::Kind::End ? std::string("end of input") : "'" + t.text + "'";
  }

  void expect(std::string_view p) {
    if (!accept(p)) fail(ErrorKind::Syntax, "expected '" + std::string(p) + "' before " + describe(cur()));
  }
  void expect_ident(std::string_view id, const std::string& what) {
    if (!accept_ident(id)) fail(ErrorKind::Syntax, "expected " + what + " before " + describe(cur()));
  }

  std::string expect_name(const std::string& what) {
    if (cur().kind != Token::Kind::Ident) fail(ErrorKind::Syntax, "expected " + what + " before " + describe(cur()));
    if (kUnsupportedKeywords.count(cur().text)) fail(ErrorKind::Unsupported, "'" + cur().text + "' is not supported");
    return toks_[pos_++].text;
  }

  void parse_attributes(Kernel& k) {
    while (check_ident("__attribute__")) {
      ++pos_;
      expect("(");
      expect("(");
      const Token name_tok = cur();
      std::string name = expect_name("attribute name");
      expect("(");
      if (cur().kind != Token::Kind::Int) fail(ErrorKind::Syntax, "expected integer attribute argument");
      const int value = std::atoi(cur().text.c_str());
      ++pos_;
      expect(")");
      expect(")");
      expect(")");
      if (value < 1) fail_at(ErrorKind::Semantic, "attribute value must be positive", name_tok);
      if (name == "num_simd_work_items") {
        k.attributes.simd_lanes = value;
      } else if (name == "num_compute_units") {
        k.attributes.compute_units = value;
      } else {
        fail_at(ErrorKind::Unsupported, "attribute '" + name + "' is not supported", name_tok);
      }
    }
  }

  bool parse_address_space(AddressSpace& space) {
    if (accept_ident("__global") || accept_ident("global")) {
      space = AddressSpace::Global;
    } else if (accept_ident("__local") || accept_ident("local")) {
      space = AddressSpace::Local;
    } else if (accept_ident("__constant") || accept_ident("constant")) {
      space = AddressSpace::Constant;
    } else if (accept_ident("__private") || accept_ident("private")) {
      space = AddressSpace::Private;
    } else {
      return false;
    }
    return true;
  }

  bool at_scalar_type() const {
    return check_ident("int") || check_ident("uint") || check_ident("unsigned") || check_ident("float");
  }

  ScalarType parse_scalar_type() {
    if (accept_ident("int")) return ScalarType::Int;
    if (accept_ident("uint")) return ScalarType::Uint;
    if (accept_ident("unsigned")) {
      accept_ident("int");
      return ScalarType::Uint;
    }
    if (accept_ident("float")) return ScalarType::Float;
    if (cur().kind == Token::Kind::Ident && kUnsupportedTypes.count(cur().text)) {
      fail(ErrorKind::Unsupported, "type '" + cur().text + "' is not supported");
    }
    if (kUnsupportedKeywords.count(cur().text)) fail(ErrorKind::Unsupported, "'" + cur().text + "' is not supported");
    fail(ErrorKind::Syntax, "expected type before " + describe(cur()));
  }

  Param parse_param() {
    const Token start = cur();
    Param p;
    bool explicit_space = false;
    p.type.is_const = accept_ident("const");
    explicit_space = parse_address_space(p.type.space);
    p.type.is_const |= accept_ident("const");
    p.type.scalar = parse_scalar_type();
    if (accept("*")) {
      p.type.pointer = true;
      if (check("*")) fail(ErrorKind::Unsupported, "pointer-to-pointer parameters are not supported");
    }
    p.type.is_const |= accept_ident("const");
    p.type.is_restrict = accept_ident("restrict") || accept_ident("__restrict");
    p.name = expect_name("parameter name");
    if (p.type.pointer && (!explicit_space || p.type.space == AddressSpace::Private)) {
      fail_at(ErrorKind::Semantic, "pointer parameter '" + p.name + "' needs __global, __local or __constant", start);
    }
    if (!p.type.pointer && p.type.space != AddressSpace::Private) {
      fail_at(ErrorKind::Semantic, "scalar parameter '" + p.name + "' cannot carry an address space", start);
    }
    return p;
  }

  Block parse_block_items(bool kernel_scope) {
    Block out;
    while (!check("}")) {
      if (cur().kind == Token::Kind::End) fail(ErrorKind::Syntax, "expected '}' before end of input");
      parse_statement(out, kernel_scope);
    }
    return out;
  }

  // Body of if/for: a braced block or one statement, in a fresh scope.
  Block parse_body() {
    symbols_.push();
    Block out;
    if (accept("{")) {
      out = parse_block_items(false);
      expect("}");
    } else {
      parse_statement(out, false);
    }
    symbols_.pop();
    return out;
  }

  void parse_statement(Block& out, bool kernel_scope) {
    const Token& t = cur();
    if (check(";")) {
      ++pos_;
      return;
    }
    if (check("{")) {
      ++pos_;
      symbols_.push();
      Nested n{parse_block_items(false)};
      symbols_.pop();
      expect("}");
      out.push_back(Stmt{std::move(n)});
      return;
    }
    if (check("#")) fail(ErrorKind::Unsupported, "preprocessor directives are not supported");
    if (t.kind != Token::Kind::Ident && !check("++") && !check("--")) {
      fail(ErrorKind::Syntax, "expected statement before " + describe(t));
    }
    if (kUnsupportedKeywords.count(t.text)) fail(ErrorKind::Unsupported, "'" + t.text + "' is not supported");
    if (t.text == "if") {
      out.push_back(parse_if());
      return;
    }
    if (t.text == "for") {
      out.push_back(parse_for());
      return;
    }
    if (t.text == "barrier") {
      out.push_back(parse_barrier());
      return;
    }
    if (is_decl_start()) {
      parse_decl(out, kernel_scope);
      expect(";");
      return;
    }
    out.push_back(parse_simple());
    expect(";");
  }

  bool is_decl_start() const {
    if (at_scalar_type()) return true;
    static const std::set<std::string, std::less<>> kQualifiers = {
        "const", "__local", "local", "__private", "private", "__global", "global", "__constant", "constant"};
    if (cur().kind == Token::Kind::Ident && (kQualifiers.count(cur().text) || kUnsupportedTypes.count(cur().text))) {
      return true;
    }
    return false;
  }

  void parse_decl(Block& out, bool kernel_scope) {
    const Token start = cur();
    Type type;
    type.is_const = accept_ident("const");
    parse_address_space(type.space);
    type.is_const |= accept_ident("const");
    type.scalar = parse_scalar_type();
    if (check("*")) fail(ErrorKind::Unsupported, "pointer variables are not supported (pointer arithmetic)");
    if (type.space == AddressSpace::Global || type.space == AddressSpace::Constant) {
      fail_at(ErrorKind::Unsupported, "__global/__constant variables inside a kernel are not supported", start);
    }
    do {
      const Token name_tok = cur();
      Decl d;
      d.type = type;
      d.name = expect_name("variable name");
      if (accept("[")) {
        if (type.space != AddressSpace::Local) {
          fail_at(ErrorKind::Unsupported, "private arrays are not supported", name_tok);
        }
        if (!kernel_scope) fail_at(ErrorKind::Semantic, "__local arrays must be declared at kernel scope", name_tok);
        if (cur().kind != Token::Kind::Int) fail(ErrorKind::Unsupported, "__local array length must be an integer literal");
        d.array_length = std::strtoll(cur().text.c_str(), nullptr, 0);
        if (*d.array_length <= 0) fail(ErrorKind::Semantic, "__local array length must be positive");
        ++pos_;
        expect("]");
      } else if (type.space == AddressSpace::Local) {
        fail_at(ErrorKind::Unsupported, "__local scalars are not supported; declare an array", name_tok);
      }
      if (accept("=")) {
        if (d.array_length) fail(ErrorKind::Unsupported, "array initialisers are not supported");
        d.init = parse_checked_expr();
      }
      declare(d.name, symbol_for(d), name_tok);
      out.push_back(Stmt{std::move(d)});
    } while (accept(","));
  }

  void declare(const std::string& name, Symbol sym, const Token& at) {
    if (symbols_.lookup(name)) fail_at(ErrorKind::Semantic, "redeclaration of '" + name + "'", at);
    if (is_work_item_builtin(name) || is_math_builtin(name) || name == "barrier") {
      fail_at(ErrorKind::Semantic, "'" + name + "' names a builtin", at);
    }
    symbols_.declare(name, sym);
  }

  static bool assign_op(std::string_view text, AssignOp& op) {
    if (text == "=") op = AssignOp::Set;
    else if (text == "+=") op = AssignOp::Add;
    else if (text == "-=") op = AssignOp::Sub;
    else if (text == "*=") op = AssignOp::Mul;
    else if (text == "/=") op = AssignOp::Div;
    else return false;
    return true;
  }

  // Assignment, store or increment (no trailing ';').
  Stmt parse_simple() {
    const Token start = cur();
    if (check("++") || check("--")) {
      AssignOp op = check("++") ? AssignOp::Inc : AssignOp::Dec;
      ++pos_;
      const Token name_tok = cur();
      std::string name = expect_name("variable");
      check_scalar_target(name, name_tok);
      return Stmt{Assign{std::move(name), op, std::nullopt}};
    }
    std::string name = expect_name("statement");
    if (check("(")) fail_at(ErrorKind::Unsupported, "call statement '" + name + "(...)' is not supported", start);
    if (accept("[")) {
      const Symbol* sym = symbols_.lookup(name);
      if (!sym) fail_at(ErrorKind::Semantic, "use of undeclared identifier '" + name + "'", start);
      if (!sym->is_array) fail_at(ErrorKind::Semantic, "'" + name + "' is not an array", start);
      if (sym->type.space == AddressSpace::Constant || sym->type.is_const) {
        fail_at(ErrorKind::Semantic, "store to read-only buffer '" + name + "'", start);
      }
      Expr index = parse_checked_expr();
      check_index(index, start);
      expect("]");
      AssignOp op;
      if (check("++") || check("--")) fail(ErrorKind::Unsupported, "increment of array elements is not supported");
      if (cur().kind != Token::Kind::Punct || !assign_op(cur().text, op)) {
        fail(ErrorKind::Syntax, "expected assignment operator before " + describe(cur()));
      }
      ++pos_;
      Expr value = parse_checked_expr();
      return Stmt{Store{std::move(name), std::move(index), op, std::move(value)}};
    }
    check_scalar_target(name, start);
    if (accept("++")) return Stmt{Assign{std::move(name), AssignOp::Inc, std::nullopt}};
    if (accept("--")) return Stmt{Assign{std::move(name), AssignOp::Dec, std::nullopt}};
    AssignOp op;
    if (check("%=") || check("&=") || check("|=") || check("^=")) {
      fail(ErrorKind::Unsupported, "compound operator '" + cur().text + "' is not supported");
    }
    if (cur().kind != Token::Kind::Punct || !assign_op(cur().text, op)) {
      fail(ErrorKind::Syntax, "expected assignment operator before " + describe(cur()));
    }
    ++pos_;
    Expr value = parse_checked_expr();
    return Stmt{Assign{std::move(name), op, std::move(value)}};
  }

  void check_scalar_target(const std::string& name, const Token& at) {
    const Symbol* sym = symbols_.lookup(name);
    if (!sym) fail_at(ErrorKind::Semantic, "use of undeclared identifier '" + name + "'", at);
    if (sym->is_array) fail_at(ErrorKind::Unsupported, "assignment to pointer '" + name + "' (pointer arithmetic)", at);
  }

  Stmt parse_if() {
    ++pos_;
    expect("(");
    Expr cond = parse_checked_expr();
    expect(")");
    If node{std::move(cond), parse_body(), {}};
    if (accept_ident("else")) {
      if (check_ident("if")) {
        node.else_body.push_back(parse_if());
      } else {
        node.else_body = parse_body();
      }
    }
    return Stmt{std::move(node)};
  }

  Stmt parse_for() {
    const Token start = cur();
    ++pos_;
    expect("(");
    symbols_.push();
    if (check(";")) fail_at(ErrorKind::Unsupported, "for-loop without an init clause", start);
    Block init;
    if (is_decl_start()) {
      parse_decl(init, false);
      if (init.size() != 1) fail_at(ErrorKind::Unsupported, "for-loop init must declare one variable", start);
    } else {
      init.push_back(parse_simple());
    }
    expect(";");
    if (check(";")) fail_at(ErrorKind::Unsupported, "for-loop without a condition", start);
    Expr cond = parse_checked_expr();
    expect(";");
    if (check(")")) fail_at(ErrorKind::Unsupported, "for-loop without a step clause", start);
    Stmt step = parse_simple();
    if (!step.as<Assign>()) fail_at(ErrorKind::Unsupported, "for-loop step must update a scalar variable", start);
    if (check(",")) fail(ErrorKind::Unsupported, "comma expressions in for-loop headers are not supported");
    expect(")");
    Block body = parse_body();
    symbols_.pop();
    return Stmt{For{std::move(init.front()), std::move(cond), std::move(step), std::move(body)}};
  }

  Stmt parse_barrier() {
    ++pos_;
    expect("(");
    std::string flags;
    do {
      std::string flag = expect_name("memory fence flag");
      if (flag != "CLK_LOCAL_MEM_FENCE" && flag != "CLK_GLOBAL_MEM_FENCE") {
        fail(ErrorKind::Semantic, "unknown barrier flag '" + flag + "'");
      }
      if (!flags.empty()) flags += " | ";
      flags += flag;
    } while (accept("|"));
    expect(")");
    expect(";");
    return Stmt{Barrier{std::move(flags)}};
  }

  // ---- expressions -------------------------------------------------------

  Expr parse_checked_expr() {
    const Token start = cur();
    Expr e = parse_binary(0);
    check_expr(e, start);
    return e;
  }

  static int precedence(std::string_view op) {
    if (op == "||") return 1;
    if (op == "&&") return 2;
    if (op == "==" || op == "!=") return 3;
    if (op == "<" || op == ">" || op == "<=" || op == ">=") return 4;
    if (op == "+" || op == "-") return 5;
    if (op == "*" || op == "/" || op == "%") return 6;
    return 0;
  }

  static BinaryOp binary_op(std::string_view op) {
    if (op == "||") return BinaryOp::LogicalOr;
    if (op == "&&") return BinaryOp::LogicalAnd;
    if (op == "==") return BinaryOp::Eq;
    if (op == "!=") return BinaryOp::Ne;
    if (op == "<") return BinaryOp::Lt;
    if (op == ">") return BinaryOp::Gt;
    if (op == "<=") return BinaryOp::Le;
    if (op == ">=") return BinaryOp::Ge;
    if (op == "+") return BinaryOp::Add;
    if (op == "-") return BinaryOp::Sub;
    if (op == "*") return BinaryOp::Mul;
    if (op == "/") return BinaryOp::Div;
    return BinaryOp::Rem;
  }

  void reject_unsupported_operator() const {
    if (cur().kind != Token::Kind::Punct) return;
    const std::string& op = cur().text;
    if (op == "&" || op == "|" || op == "^" || op == "<<" || op == ">>" || op == "~") {
      fail(ErrorKind::Unsupported, "bitwise operator '" + op + "' is not supported");
    }
    if (op == "?") fail(ErrorKind::Unsupported, "conditional operator '?:' is not supported");
    if (op == "." || op == "->") fail(ErrorKind::Unsupported, "member access (structs) is not supported");
    if (op == "=" || op == "+=" || op == "-=" || op == "*=" || op == "/=" || op == "++" || op == "--") {
      fail(ErrorKind::Unsupported, "assignment inside an expression is not supported");
    }
  }

  Expr parse_binary(int min_prec) {
    Expr lhs = parse_unary();
    for (;;) {
      reject_unsupported_operator();
      if (cur().kind != Token::Kind::Punct) break;
      const int prec = precedence(cur().text);
      if (prec == 0 || prec <= min_prec) break;
      const BinaryOp op = binary_op(cur().text);
      ++pos_;
      Expr rhs = parse_binary(prec);
      lhs = build::binary(op, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  Expr parse_unary() {
    if (accept("-")) return build::unary(UnaryOp::Neg, parse_unary());
    if (accept("!")) return build::unary(UnaryOp::Not, parse_unary());
    if (accept("+")) return parse_unary();
    if (check("*")) fail(ErrorKind::Unsupported, "pointer dereference (pointer arithmetic) is not supported");
    if (check("&")) fail(ErrorKind::Unsupported, "address-of operator (pointer arithmetic) is not supported");
    reject_unsupported_operator();
    return parse_primary();
  }

  Expr parse_primary() {
    const Token t = cur();
    if (accept("(")) {
      if (at_scalar_type() || (cur().kind == Token::Kind::Ident && kUnsupportedTypes.count(cur().text))) {
        fail(ErrorKind::Unsupported, "casts are not supported");
      }
      Expr e = parse_binary(0);
      expect(")");
      return e;
    }
    if (t.kind == Token::Kind::Int) {
      ++pos_;
      std::string digits = t.text;
      bool is_unsigned = false;
      if (!digits.empty() && (digits.back() == 'u' || digits.back() == 'U')) {
        is_unsigned = true;
        digits.pop_back();
      }
      errno = 0;
      const unsigned long long v = std::strtoull(digits.c_str(), nullptr, 0);
      if (errno != 0 || v > 0xFFFFFFFFull) fail_at(ErrorKind::Semantic, "integer literal out of range", t);
      if (!is_unsigned && v > 0x7FFFFFFFull) is_unsigned = true;
      return Expr{IntLiteral{static_cast<std::int64_t>(v), is_unsigned}};
    }
    if (t.kind == Token::Kind::Float) {
      ++pos_;
      std::string digits = t.text;
      if (digits.back() == 'f' || digits.back() == 'F') digits.pop_back();
      float v = 0.0f;
      auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
      if (ec != std::errc() || ptr != digits.data() + digits.size()) {
        fail_at(ErrorKind::Semantic, "float literal out of range", t);
      }
      return build::float_lit(v);
    }
    if (t.kind != Token::Kind::Ident) fail(ErrorKind::Syntax, "expected expression before " + describe(t));
    if (kUnsupportedKeywords.count(t.text)) fail(ErrorKind::Unsupported, "'" + t.text + "' is not supported");
    ++pos_;
    if (accept("(")) {
      std::vector<Expr> args;
      if (!check(")")) {
        do {
          args.push_back(parse_binary(0));
        } while (accept(","));
      }
      expect(")");
      return build::call(t.text, std::move(args));
    }
    if (accept("[")) {
      Expr index = parse_binary(0);
      expect("]");
      if (check("[")) fail(ErrorKind::Unsupported, "multi-dimensional indexing is not supported");
      return build::load(t.text, std::move(index));
    }
    return build::var(t.text);
  }

  // Name resolution and typing, reported at the expression's first token.
  void check_expr(const Expr& e, const Token& at) {
    if (const auto* v = e.as<VarRef>()) {
      const Symbol* sym = symbols_.lookup(v->name);
      if (!sym) fail_at(ErrorKind::Semantic, "use of undeclared identifier '" + v->name + "'", at);
      if (sym->is_array) {
        fail_at(ErrorKind::Unsupported, "pointer '" + v->name + "' used outside indexing (pointer arithmetic)", at);
      }
    } else if (const auto* a = e.as<ArrayLoad>()) {
      const Symbol* sym = symbols_.lookup(a->array);
      if (!sym) fail_at(ErrorKind::Semantic, "use of undeclared identifier '" + a->array + "'", at);
      if (!sym->is_array) fail_at(ErrorKind::Semantic, "'" + a->array + "' is not an array", at);
      check_expr(*a->index, at);
      check_index(*a->index, at);
    } else if (const auto* u = e.as<Unary>()) {
      check_expr(*u->operand, at);
    } else if (const auto* b = e.as<Binary>()) {
      check_expr(*b->lhs, at);
      check_expr(*b->rhs, at);
      if (b->op == BinaryOp::Rem && (type_of(*b->lhs, symbols_) == ScalarType::Float ||
                                      type_of(*b->rhs, symbols_) == ScalarType::Float)) {
        fail_at(ErrorKind::Semantic, "operator '%' requires integer operands", at);
      }
    } else if (const auto* c = e.as<Call>()) {
      if (is_work_item_builtin(c->callee)) {
        if (c->args.size() != 1) fail_at(ErrorKind::Semantic, c->callee + " takes one argument", at);
        const auto* lit = c->args[0].as<IntLiteral>();
        if (!lit) fail_at(ErrorKind::Unsupported, c->callee + " dimension must be an integer literal", at);
        if (lit->value > 2) fail_at(ErrorKind::Semantic, c->callee + " dimension must be 0, 1 or 2", at);
      } else if (is_math_builtin(c->callee)) {
        const std::size_t want = (c->callee == "min" || c->callee == "max") ? 2 : 1;
        if (c->args.size() != want) {
          fail_at(ErrorKind::Semantic, c->callee + " takes " + std::to_string(want) + " argument(s)", at);
        }
        for (const Expr& arg : c->args) check_expr(arg, at);
      } else if (c->callee == "barrier") {
        fail_at(ErrorKind::Semantic, "barrier() is a statement", at);
      } else {
        fail_at(ErrorKind::Unsupported, "call to '" + c->callee + "' is not supported", at);
      }
    }
  }

  void check_index(const Expr& index, const Token& at) {
    if (type_of(index, symbols_) == ScalarType::Float) {
      fail_at(ErrorKind::Semantic, "array index must be an integer", at);
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  SymbolTable symbols_;
};

}  // namespace

Kernel parse(std::string_view source) {
  std::vector<std::string> notes;
  Parser parser(Lexer(source).run(notes));
  Kernel k = parser.parse_kernel();
  k.notes = std::move(notes);
  return k;
}

}  // namespace thc
