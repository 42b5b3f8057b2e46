#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "promptvfx/field/ast.hpp"

namespace pvfx::field {

inline constexpr std::size_t kMaxSourceBytes = 64 * 1024;
inline constexpr std::size_t kMaxNodes = 10'000;

/// Parses one attribute source.
///
///   program := { "let" IDENT "=" expr ";" } "return" expr [";"]
///
/// Identifiers resolve at parse time: environment variables, earlier `let`
/// names, or builtin calls with the right arity. Throws ParseError carrying
/// line:column.
Ast parse(std::string_view source);

/// Annotates every node with its type and checks the result against
/// `expected`. Throws TypeError.
Ast typecheck(Ast ast, ValueType expected);

// parse + typecheck, reporting the first diagnostic instead of throwing.
struct Diagnostic {
  std::string kind;  // ParseError | TypeError
  SourceLocation loc;
  std::string message;  // "line:col: text"
};
std::optional<Diagnostic> check_source(std::string_view source, ValueType expected);

struct BuiltinInfo {
  std::string_view name;
  Builtin id;
  int arity;
};
std::span<const BuiltinInfo> builtins();

}  // namespace pvfx::field
