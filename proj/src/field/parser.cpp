#include "promptvfx/field/parser.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <unordered_map>

namespace pvfx::field {
namespace {

constexpr std::array<BuiltinInfo, 22> kBuiltins{{
    {"sin", Builtin::sin, 1},         {"cos", Builtin::cos, 1},
    {"exp", Builtin::exp, 1},         {"sqrt", Builtin::sqrt, 1},
    {"abs", Builtin::abs, 1},         {"floor", Builtin::floor, 1},
    {"min", Builtin::min, 2},         {"max", Builtin::max, 2},
    {"pow", Builtin::pow, 2},         {"clamp", Builtin::clamp, 3},
    {"mix", Builtin::mix, 3},         {"smoothstep", Builtin::smoothstep, 3},
    {"length", Builtin::length, 1},   {"normalize", Builtin::normalize, 1},
    {"dot", Builtin::dot, 2},         {"cross", Builtin::cross, 2},
    {"vec3", Builtin::vec3, 3},       {"select", Builtin::select, 3},
    {"hash", Builtin::hash, 2},       {"noise3", Builtin::noise3, 1},
    {"phase", Builtin::phase, 2},     {"ramp", Builtin::ramp, 2},
}};

const BuiltinInfo* find_builtin(std::string_view name) {
  for (const auto& b : kBuiltins)
    if (b.name == name) return &b;
  return nullptr;
}

const std::unordered_map<std::string_view, Variable>& variables() {
  static const std::unordered_map<std::string_view, Variable> table = {
      {"p0", Variable::p0}, {"c0", Variable::c0}, {"a0", Variable::a0},
      {"i", Variable::i},   {"n", Variable::n},   {"t", Variable::t},
      {"T", Variable::T},   {"centroid", Variable::centroid},
      {"bbox_min", Variable::bbox_min}, {"bbox_max", Variable::bbox_max}};
  return table;
}

enum class Tok {
  end, ident, number, kw_let, kw_return, plus, minus, star, slash, lparen, rparen, comma,
  semicolon, assign, dot, lt, le, gt, ge, eq, ne
};

struct Token {
  Tok kind;
  std::string_view text;
  double number = 0.0;
  SourceLocation loc;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_space_and_comments();
    SourceLocation loc{line_, col_};
    if (pos_ >= src_.size()) return {Tok::end, {}, 0.0, loc};
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        advance();
      std::string_view word = src_.substr(start, pos_ - start);
      Tok kind = word == "let" ? Tok::kw_let : word == "return" ? Tok::kw_return : Tok::ident;
      return remember({kind, word, 0.0, loc});
    }
    bool leading_dot = c == '.' && pos_ + 1 < src_.size() &&
                       std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])) &&
                       !prev_is_operand_;
    if (std::isdigit(static_cast<unsigned char>(c)) || leading_dot) return lex_number(loc);

    advance();
    auto two = [&](char second, Tok yes, Tok no) {
      if (pos_ < src_.size() && src_[pos_] == second) {
        advance();
        return yes;
      }
      return no;
    };
    Tok kind;
    switch (c) {
      case '+': kind = Tok::plus; break;
      case '-': kind = Tok::minus; break;
      case '*': kind = Tok::star; break;
      case '/': kind = Tok::slash; break;
      case '(': kind = Tok::lparen; break;
      case ')': kind = Tok::rparen; break;
      case ',': kind = Tok::comma; break;
      case ';': kind = Tok::semicolon; break;
      case '.': kind = Tok::dot; break;
      case '<': kind = two('=', Tok::le, Tok::lt); break;
      case '>': kind = two('=', Tok::ge, Tok::gt); break;
      case '=': kind = two('=', Tok::eq, Tok::assign); break;
      case '!':
        if (pos_ < src_.size() && src_[pos_] == '=') {
          advance();
          kind = Tok::ne;
          break;
        }
        [[fallthrough]];
      default:
        throw ParseError(loc, std::string("unexpected character '") + c + "'");
    }
    return remember({kind, src_.substr(pos_ - 1, 1), 0.0, loc});
  }

 private:
  Token remember(Token t) {
    prev_is_operand_ = t.kind == Tok::ident || t.kind == Tok::number || t.kind == Tok::rparen;
    return t;
  }

  Token lex_number(SourceLocation loc) {
    std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      // `1.x` is not a member access on a number; treat the dot as part of the literal
      advance();
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_;
      int save_col = col_;
      advance();
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        digits();
      } else {
        pos_ = save;
        col_ = save_col;
      }
    }
    std::string text(src_.substr(start, pos_ - start));
    char* end = nullptr;
    double value = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || !std::isfinite(value))
      throw ParseError(loc, "invalid numeric literal '" + text + "'");
    return remember({Tok::number, src_.substr(start, pos_ - start), value, loc});
  }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space_and_comments() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '#' || (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/')) {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  bool prev_is_operand_ = false;
};

constexpr int kMaxDepth = 200;

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) { tok_ = lex_.next(); }

  Ast run() {
    while (tok_.kind == Tok::kw_let) {
      SourceLocation loc = tok_.loc;
      bump();
      if (tok_.kind != Tok::ident) throw ParseError(tok_.loc, "expected identifier after 'let'");
      std::string name(tok_.text);
      if (variables().count(name) || find_builtin(name))
        throw ParseError(tok_.loc, "'" + name + "' shadows a builtin name");
      for (const auto& l : ast_.lets)
        if (l.name == name) throw ParseError(tok_.loc, "'" + name + "' is already defined");
      bump();
      expect(Tok::assign, "'='");
      NodePtr value = expr(0);
      expect(Tok::semicolon, "';'");
      ast_.lets.push_back({std::move(name), loc, std::move(value)});
    }
    if (tok_.kind != Tok::kw_return) throw ParseError(tok_.loc, "expected 'let' or 'return'");
    bump();
    ast_.result = expr(0);
    if (tok_.kind == Tok::semicolon) bump();
    if (tok_.kind != Tok::end) throw ParseError(tok_.loc, "unexpected input after return expression");
    return std::move(ast_);
  }

 private:
  void bump() { tok_ = lex_.next(); }

  void expect(Tok kind, const char* what) {
    if (tok_.kind != kind)
      throw ParseError(tok_.loc, std::string("expected ") + what + ", found '" +
                                     (tok_.kind == Tok::end ? std::string("end of input")
                                                            : std::string(tok_.text)) +
                                     "'");
    bump();
  }

  NodePtr make(Node::Kind kind, SourceLocation loc) {
    if (++ast_.node_count > kMaxNodes)
      throw ParseError(loc, "program exceeds the node cap of " + std::to_string(kMaxNodes));
    auto n = std::make_unique<Node>();
    n->kind = kind;
    n->loc = loc;
    return n;
  }

  struct DepthGuard {
    int& d;
    DepthGuard(int& depth, SourceLocation loc) : d(depth) {
      if (++d > kMaxDepth) throw ParseError(loc, "expression nested too deeply");
    }
    ~DepthGuard() { --d; }
  };

  NodePtr expr(int) { return comparison(); }

  NodePtr comparison() {
    NodePtr lhs = additive();
    for (;;) {
      BinaryOp op;
      switch (tok_.kind) {
        case Tok::lt: op = BinaryOp::lt; break;
        case Tok::le: op = BinaryOp::le; break;
        case Tok::gt: op = BinaryOp::gt; break;
        case Tok::ge: op = BinaryOp::ge; break;
        case Tok::eq: op = BinaryOp::eq; break;
        case Tok::ne: op = BinaryOp::ne; break;
        default: return lhs;
      }
      lhs = binary(op, std::move(lhs), [this] { return additive(); });
    }
  }

  NodePtr additive() {
    NodePtr lhs = multiplicative();
    while (tok_.kind == Tok::plus || tok_.kind == Tok::minus) {
      BinaryOp op = tok_.kind == Tok::plus ? BinaryOp::add : BinaryOp::sub;
      lhs = binary(op, std::move(lhs), [this] { return multiplicative(); });
    }
    return lhs;
  }

  NodePtr multiplicative() {
    NodePtr lhs = unary();
    while (tok_.kind == Tok::star || tok_.kind == Tok::slash) {
      BinaryOp op = tok_.kind == Tok::star ? BinaryOp::mul : BinaryOp::div;
      lhs = binary(op, std::move(lhs), [this] { return unary(); });
    }
    return lhs;
  }

  template <class Rhs>
  NodePtr binary(BinaryOp op, NodePtr lhs, Rhs rhs) {
    SourceLocation loc = tok_.loc;
    bump();
    auto n = make(Node::Kind::binary, loc);
    n->op = op;
    n->args.push_back(std::move(lhs));
    n->args.push_back(rhs());
    return n;
  }

  NodePtr unary() {
    DepthGuard guard(depth_, tok_.loc);
    if (tok_.kind == Tok::minus) {
      SourceLocation loc = tok_.loc;
      bump();
      auto n = make(Node::Kind::negate, loc);
      n->args.push_back(unary());
      return n;
    }
    if (tok_.kind == Tok::plus) {
      bump();
      return unary();
    }
    return postfix();
  }

  NodePtr postfix() {
    NodePtr base = primary();
    while (tok_.kind == Tok::dot) {
      SourceLocation loc = tok_.loc;
      bump();
      if (tok_.kind != Tok::ident || tok_.text.size() != 1 ||
          std::string_view("xyz").find(tok_.text[0]) == std::string_view::npos)
        throw ParseError(tok_.loc, "expected component .x, .y or .z");
      auto n = make(Node::Kind::member, loc);
      n->component = tok_.text[0] - 'x';
      n->name = std::string(tok_.text);
      bump();
      n->args.push_back(std::move(base));
      base = std::move(n);
    }
    return base;
  }

  NodePtr primary() {
    Token t = tok_;
    switch (t.kind) {
      case Tok::number: {
        bump();
        auto n = make(Node::Kind::number, t.loc);
        n->number = t.number;
        return n;
      }
      case Tok::lparen: {
        bump();
        NodePtr inner = expr(0);
        expect(Tok::rparen, "')'");
        return inner;
      }
      case Tok::ident: {
        bump();
        std::string name(t.text);
        if (tok_.kind == Tok::lparen) return call(name, t.loc);
        if (auto it = variables().find(name); it != variables().end()) {
          auto n = make(Node::Kind::variable, t.loc);
          n->variable = it->second;
          n->name = name;
          return n;
        }
        for (std::size_t k = 0; k < ast_.lets.size(); ++k) {
          if (ast_.lets[k].name == name) {
            auto n = make(Node::Kind::local, t.loc);
            n->local = static_cast<int>(k);
            n->name = name;
            return n;
          }
        }
        if (find_builtin(name))
          throw ParseError(t.loc, "builtin '" + name + "' must be called");
        throw ParseError(t.loc, "unknown identifier '" + name + "'");
      }
      case Tok::end: throw ParseError(t.loc, "unexpected end of input");
      default: throw ParseError(t.loc, "unexpected '" + std::string(t.text) + "'");
    }
  }

  NodePtr call(const std::string& name, SourceLocation loc) {
    const BuiltinInfo* info = find_builtin(name);
    if (!info) {
      if (variables().count(name)) throw ParseError(loc, "'" + name + "' is not a function");
      throw ParseError(loc, "unknown identifier '" + name + "'");
    }
    auto n = make(Node::Kind::call, loc);
    n->builtin = info->id;
    n->name = name;
    bump();  // (
    if (tok_.kind != Tok::rparen) {
      for (;;) {
        n->args.push_back(expr(0));
        if (tok_.kind != Tok::comma) break;
        bump();
      }
    }
    expect(Tok::rparen, "')'");
    if (static_cast<int>(n->args.size()) != info->arity)
      throw ParseError(loc, "arity mismatch: " + name + " takes " + std::to_string(info->arity) +
                                " argument(s), got " + std::to_string(n->args.size()));
    return n;
  }

  Lexer lex_;
  Token tok_;
  Ast ast_;
  int depth_ = 0;
};

// ---------------------------------------------------------------------------

using VT = ValueType;

[[noreturn]] void type_error(const Node& n, const std::string& msg) { throw TypeError(n.loc, msg); }

std::string sig(const Node& n) {
  std::string s = n.name + "(";
  for (std::size_t k = 0; k < n.args.size(); ++k) {
    if (k) s += ", ";
    s += to_string(n.args[k]->type);
  }
  return s + ")";
}

class Checker {
 public:
  explicit Checker(Ast& ast) : ast_(ast) {}

  VT check(Node& n) {
    for (auto& a : n.args) check(*a);
    n.type = infer(n);
    return n.type;
  }

 private:
  VT infer(Node& n) {
    auto arg = [&](std::size_t k) { return n.args[k]->type; };
    switch (n.kind) {
      case Node::Kind::number: return VT::scalar;
      case Node::Kind::variable:
        switch (n.variable) {
          case Variable::p0:
          case Variable::c0:
          case Variable::centroid:
          case Variable::bbox_min:
          case Variable::bbox_max: return VT::vec3;
          default: return VT::scalar;
        }
      case Node::Kind::local: return ast_.lets[n.local].value->type;
      case Node::Kind::negate: return arg(0);
      case Node::Kind::member:
        if (arg(0) != VT::vec3)
          type_error(n, "component ." + n.name + " requires vec3, got " + to_string(arg(0)));
        return VT::scalar;
      case Node::Kind::binary: return binary(n, arg(0), arg(1));
      case Node::Kind::call: return call(n);
    }
    return VT::unknown;
  }

  static VT binary(const Node& n, VT a, VT b) {
    auto mismatch = [&]() -> VT {
      type_error(n, std::string("operator ") + to_string(n.op) + " not defined for " +
                        to_string(a) + " and " + to_string(b));
    };
    switch (n.op) {
      case BinaryOp::add:
      case BinaryOp::sub: return a == b ? a : mismatch();
      case BinaryOp::mul: return (a == VT::vec3 || b == VT::vec3) ? VT::vec3 : VT::scalar;
      case BinaryOp::div:
        if (a == VT::scalar && b == VT::vec3) return mismatch();
        return a;
      default:
        if (a != VT::scalar || b != VT::scalar) return mismatch();
        return VT::scalar;
    }
  }

  static VT call(const Node& n) {
    auto arg = [&](std::size_t k) { return n.args[k]->type; };
    auto bad = [&]() -> VT { type_error(n, "no overload for " + sig(n)); };
    auto all = [&](VT t) {
      for (const auto& a : n.args)
        if (a->type != t) return false;
      return true;
    };
    switch (n.builtin) {
      case Builtin::sin:
      case Builtin::cos:
      case Builtin::exp:
      case Builtin::sqrt:
      case Builtin::abs:
      case Builtin::floor: return arg(0);
      case Builtin::min:
      case Builtin::max: return arg(0) == arg(1) ? arg(0) : bad();
      case Builtin::pow:
        return (arg(0) == arg(1) || arg(1) == VT::scalar) ? arg(0) : bad();
      case Builtin::clamp:
        if ((arg(1) == arg(0) || arg(1) == VT::scalar) && (arg(2) == arg(0) || arg(2) == VT::scalar))
          return arg(0);
        return bad();
      case Builtin::mix:
        if (arg(0) == arg(1) && (arg(2) == VT::scalar || arg(2) == arg(0))) return arg(0);
        return bad();
      case Builtin::smoothstep:
        return (arg(0) == VT::scalar && arg(1) == VT::scalar) ? arg(2) : bad();
      case Builtin::length: return arg(0) == VT::vec3 ? VT::scalar : bad();
      case Builtin::normalize: return arg(0) == VT::vec3 ? VT::vec3 : bad();
      case Builtin::dot: return all(VT::vec3) ? VT::scalar : bad();
      case Builtin::cross: return all(VT::vec3) ? VT::vec3 : bad();
      case Builtin::vec3: return all(VT::scalar) ? VT::vec3 : bad();
      case Builtin::select:
        return (arg(0) == VT::scalar && arg(1) == arg(2)) ? arg(1) : bad();
      case Builtin::hash:
      case Builtin::phase:
      case Builtin::ramp: return all(VT::scalar) ? VT::scalar : bad();
      case Builtin::noise3: return arg(0) == VT::vec3 ? VT::scalar : bad();
    }
    return bad();
  }

  Ast& ast_;
};

}  // namespace

std::span<const BuiltinInfo> builtins() { return kBuiltins; }

Ast parse(std::string_view source) {
  if (source.size() > kMaxSourceBytes)
    throw ParseError({1, 1}, "source exceeds " + std::to_string(kMaxSourceBytes) + " bytes");
  return Parser(source).run();
}

Ast typecheck(Ast ast, ValueType expected) {
  Checker checker(ast);
  for (auto& let : ast.lets) checker.check(*let.value);
  ast.type = checker.check(*ast.result);
  if (ast.type != expected)
    throw TypeError(ast.result->loc, std::string("program returns ") + to_string(ast.type) +
                                         ", expected " + to_string(expected));
  return ast;
}

std::optional<Diagnostic> check_source(std::string_view source, ValueType expected) {
  try {
    typecheck(parse(source), expected);
    return std::nullopt;
  } catch (const ParseError& e) {
    return Diagnostic{"ParseError", e.location(), e.what()};
  } catch (const TypeError& e) {
    return Diagnostic{"TypeError", e.location(), e.what()};
  }
}

}  // namespace pvfx::field
