#pragma once

#include <memory>
#include <string>
#include <vector>

#include "promptvfx/error.hpp"

namespace pvfx::field {

enum class ValueType { unknown, scalar, vec3 };

inline const char* to_string(ValueType t) {
  switch (t) {
    case ValueType::scalar: return "scalar";
    case ValueType::vec3: return "vec3";
    default: return "unknown";
  }
}

enum class BinaryOp { add, sub, mul, div, lt, le, gt, ge, eq, ne };

inline const char* to_string(BinaryOp op) {
  static const char* names[] = {"+", "-", "*", "/", "<", "<=", ">", ">=", "==", "!="};
  return names[static_cast<int>(op)];
}

inline bool is_comparison(BinaryOp op) { return op >= BinaryOp::lt; }

enum class Builtin {
  sin, cos, exp, sqrt, abs, floor, min, max, pow, clamp, mix, smoothstep, length, normalize,
  dot, cross, vec3, select, hash, noise3, phase, ramp
};

// Variables bound by the evaluation environment.
enum class Variable { p0, c0, a0, i, n, t, T, centroid, bbox_min, bbox_max };

struct Node;
using NodePtr = std::unique_ptr<Node>;

struct Node {
  enum class Kind { number, variable, local, negate, binary, call, member };

  Kind kind;
  SourceLocation loc;
  ValueType type = ValueType::unknown;  // filled in by typecheck

  double number = 0.0;          // number
  Variable variable{};          // variable
  int local = -1;               // local: index into Ast::lets
  BinaryOp op{};                // binary
  Builtin builtin{};            // call
  int component = 0;            // member: 0..2
  std::string name;             // identifier text, for diagnostics
  std::vector<NodePtr> args;    // operands / call arguments
};

struct Let {
  std::string name;
  SourceLocation loc;
  NodePtr value;
};

// One attribute source: `let` bindings followed by a returned expression.
struct Ast {
  std::vector<Let> lets;
  NodePtr result;
  std::size_t node_count = 0;
  ValueType type = ValueType::unknown;  // result type after typecheck
};

}  // namespace pvfx::field
