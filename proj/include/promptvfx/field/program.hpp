#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "promptvfx/field/ast.hpp"
#include "promptvfx/splat_io.hpp"
#include "promptvfx/vec3.hpp"

namespace pvfx::field {

struct FieldSources {
  std::string position;
  std::string color;
  std::string alpha;
  friend bool operator==(const FieldSources&, const FieldSources&) = default;
};

// Everything a field function may read for one splat at one instant.
struct EvalEnv {
  Vec3 p0;
  Vec3 c0;
  double a0 = 1.0;
  double i = 0.0;
  double n = 1.0;
  double t = 0.0;
  double T = 1.0;
  Vec3 centroid;
  Vec3 bbox_min;
  Vec3 bbox_max;
  std::uint64_t seed = 0;
};

struct AttributeState {
  Vec3 position;
  Vec3 rgb;
  double alpha = 1.0;
  friend bool operator==(const AttributeState&, const AttributeState&) = default;
};

// Counts lanes whose evaluation hit a non-finite intermediate and fell back
// to the original attribute.
struct EvalStats {
  std::size_t nonfinite_fallbacks = 0;
};

class CompiledExpr;

/// A validated triple of field functions plus the animation length and
/// noise seed. Immutable and cheap to copy.
class FieldProgram {
 public:
  /// Parses, typechecks and compiles all three sources. Throws ParseError or
  /// TypeError with the attribute name in the message; also ArgumentError
  /// for a non-positive or non-finite duration.
  static FieldProgram compile(FieldSources sources, double duration, std::uint64_t seed);
  static FieldProgram identity(double duration, std::uint64_t seed = 0);

  const FieldSources& sources() const noexcept { return sources_; }
  double duration() const noexcept { return duration_; }
  std::uint64_t seed() const noexcept { return seed_; }

  const CompiledExpr& position_code() const noexcept { return *position_; }
  const CompiledExpr& color_code() const noexcept { return *color_; }
  const CompiledExpr& alpha_code() const noexcept { return *alpha_; }

 private:
  FieldSources sources_;
  double duration_ = 1.0;
  std::uint64_t seed_ = 0;
  std::shared_ptr<const CompiledExpr> position_, color_, alpha_;
};

inline const FieldSources kIdentitySources{"return p0;", "return c0;", "return a0;"};

// Compiles a single typed source; exposed for tooling and tests.
std::shared_ptr<const CompiledExpr> compile_expr(const Ast& typed);
std::size_t instruction_count(const CompiledExpr& code);

/// Evaluates all three field functions for one splat. Total: never throws,
/// never returns non-finite values; rgb and alpha are clamped to [0,1].
AttributeState eval_attribute(const FieldProgram& program, const EvalEnv& env,
                              EvalStats* stats = nullptr);

/// Per-selection inputs prepared once and reused across frames.
class BatchEvaluator {
 public:
  BatchEvaluator(const Scene& scene, const SelectionMask& mask);

  std::size_t size() const noexcept { return index_.size(); }

  // The environment eval_attribute would see for the k-th masked splat.
  EvalEnv env(std::size_t k, double t, const FieldProgram& program) const;

  /// Fills `out` (size() entries, mask order). Throws TimeRangeError when t
  /// is outside [0, program.duration()].
  void evaluate(const FieldProgram& program, double t, std::span<AttributeState> out,
                EvalStats* stats = nullptr, unsigned max_threads = 0) const;

 private:
  std::vector<double> px_, py_, pz_, cr_, cg_, cb_, a_, index_;
  Vec3 centroid_, bbox_min_, bbox_max_;
};

std::vector<AttributeState> eval_batch(const FieldProgram& program, const Scene& scene,
                                       const SelectionMask& mask, double t,
                                       EvalStats* stats = nullptr);

}  // namespace pvfx::field
