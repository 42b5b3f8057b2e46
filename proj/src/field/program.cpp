#include "promptvfx/field/program.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "promptvfx/error.hpp"
#include "promptvfx/field/noise.hpp"
#include "promptvfx/field/parser.hpp"
#include "promptvfx/parallel.hpp"

namespace pvfx::field {

// ---------------------------------------------------------------------------
// Bytecode. Every value is lowered to scalar registers (vec3 = three
// registers), and each instruction runs over a block of lanes. A single
// splat evaluation is the one-lane case of the same loop, which is what
// keeps eval_attribute and the batch path bit-identical.

enum class Op : std::uint8_t {
  konst, load, neg, add, sub, mul, div, lt, le, gt, ge, eq, ne,
  sin, cos, exp, sqrt, abs, floor, min, max, pow, clamp, mix, smoothstep,
  select, hash, noise3, phase, ramp
};

// Lane input slots.
enum Slot : int {
  kP0 = 0, kC0 = 3, kA0 = 6, kIndex = 7, kCount = 8, kTime = 9, kDuration = 10,
  kCentroid = 11, kBboxMin = 14, kBboxMax = 17, kSlotCount = 20
};

struct Instr {
  Op op;
  int dst = 0;
  int a = 0, b = 0, c = 0, d = 0;
  double k = 0.0;  // konst value, or input slot for load
};

class CompiledExpr {
 public:
  std::vector<Instr> code;
  std::vector<int> result;  // 1 or 3 registers
  int registers = 0;
};

std::size_t instruction_count(const CompiledExpr& code) { return code.code.size(); }

namespace {

struct Val {
  std::array<int, 3> r{};
  int width = 1;
};

class Compiler {
 public:
  explicit Compiler(const Ast& ast) : ast_(ast) {}

  std::shared_ptr<const CompiledExpr> run() {
    for (const auto& let : ast_.lets) {
      Val v = emit(*let.value);
      for (int k = 0; k < v.width; ++k) pinned_[v.r[k]] = true;
      lets_.push_back(v);
    }
    Val out = emit(*ast_.result);
    auto expr = std::make_shared<CompiledExpr>();
    expr->code = std::move(code_);
    expr->result.assign(out.r.begin(), out.r.begin() + out.width);
    expr->registers = next_;
    return expr;
  }

 private:
  int alloc() {
    while (!free_list_.empty()) {
      int r = free_list_.back();
      free_list_.pop_back();
      if (free_[r]) {
        free_[r] = false;
        return r;
      }
    }
    free_.push_back(false);
    pinned_.push_back(false);
    return next_++;
  }

  void free_reg(int r) {
    if (pinned_[r] || free_[r]) return;
    free_[r] = true;
    free_list_.push_back(r);
  }

  void release(const Val& v) {
    for (int k = 0; k < v.width; ++k) free_reg(v.r[k]);
  }

  int op(Op o, int a = 0, int b = 0, int c = 0, int d = 0, double k = 0.0) {
    int dst = alloc();
    code_.push_back({o, dst, a, b, c, d, k});
    return dst;
  }

  Val scalar(int r) { return Val{{r, r, r}, 1}; }
  Val vec(int x, int y, int z) { return Val{{x, y, z}, 3}; }

  // Component k of v, broadcasting scalars.
  static int at(const Val& v, int k) { return v.width == 1 ? v.r[0] : v.r[k]; }

  Val load(int slot, int width) {
    if (width == 1) return scalar(op(Op::load, 0, 0, 0, 0, slot));
    int x = op(Op::load, 0, 0, 0, 0, slot);
    int y = op(Op::load, 0, 0, 0, 0, slot + 1);
    int z = op(Op::load, 0, 0, 0, 0, slot + 2);
    return vec(x, y, z);
  }

  // Componentwise application over operands, broadcasting scalar operands.
  template <std::size_t N>
  Val map(Op o, const std::array<const Val*, N>& args) {
    int width = 1;
    for (auto* a : args) width = std::max(width, a->width);
    Val out;
    out.width = width;
    for (int k = 0; k < width; ++k) {
      int r[4] = {0, 0, 0, 0};
      for (std::size_t j = 0; j < N; ++j) r[j] = at(*args[j], k);
      out.r[k] = op(o, r[0], r[1], r[2], r[3]);
    }
    for (auto* a : args) release(*a);
    if (width == 1) out.r[1] = out.r[2] = out.r[0];
    return out;
  }

  Val emit(const Node& n) {
    switch (n.kind) {
      case Node::Kind::number: return scalar(op(Op::konst, 0, 0, 0, 0, n.number));
      case Node::Kind::local: return lets_[n.local];
      case Node::Kind::variable: return variable(n.variable);
      case Node::Kind::negate: {
        Val a = emit(*n.args[0]);
        return map<1>(Op::neg, {&a});
      }
      case Node::Kind::member: {
        Val a = emit(*n.args[0]);
        int r = a.r[n.component];
        for (int k = 0; k < 3; ++k)
          if (a.r[k] != r) free_reg(a.r[k]);
        return scalar(r);
      }
      case Node::Kind::binary: {
        Val a = emit(*n.args[0]);
        Val b = emit(*n.args[1]);
        static constexpr Op table[] = {Op::add, Op::sub, Op::mul, Op::div, Op::lt,
                                       Op::le,  Op::gt,  Op::ge,  Op::eq,  Op::ne};
        return map<2>(table[static_cast<int>(n.op)], {&a, &b});
      }
      case Node::Kind::call: return call(n);
    }
    return {};
  }

  Val variable(Variable v) {
    switch (v) {
      case Variable::p0: return load(kP0, 3);
      case Variable::c0: return load(kC0, 3);
      case Variable::a0: return load(kA0, 1);
      case Variable::i: return load(kIndex, 1);
      case Variable::n: return load(kCount, 1);
      case Variable::t: return load(kTime, 1);
      case Variable::T: return load(kDuration, 1);
      case Variable::centroid: return load(kCentroid, 3);
      case Variable::bbox_min: return load(kBboxMin, 3);
      case Variable::bbox_max: return load(kBboxMax, 3);
    }
    return {};
  }

  Val binop(Op o, int a, int b) { return scalar(op(o, a, b)); }

  Val call(const Node& n) {
    std::vector<Val> a;
    for (const auto& arg : n.args) a.push_back(emit(*arg));
    switch (n.builtin) {
      case Builtin::sin: return map<1>(Op::sin, {&a[0]});
      case Builtin::cos: return map<1>(Op::cos, {&a[0]});
      case Builtin::exp: return map<1>(Op::exp, {&a[0]});
      case Builtin::sqrt: return map<1>(Op::sqrt, {&a[0]});
      case Builtin::abs: return map<1>(Op::abs, {&a[0]});
      case Builtin::floor: return map<1>(Op::floor, {&a[0]});
      case Builtin::min: return map<2>(Op::min, {&a[0], &a[1]});
      case Builtin::max: return map<2>(Op::max, {&a[0], &a[1]});
      case Builtin::pow: return map<2>(Op::pow, {&a[0], &a[1]});
      case Builtin::clamp: return map<3>(Op::clamp, {&a[0], &a[1], &a[2]});
      case Builtin::mix: return map<3>(Op::mix, {&a[0], &a[1], &a[2]});
      case Builtin::smoothstep: return map<3>(Op::smoothstep, {&a[0], &a[1], &a[2]});
      case Builtin::select: return map<3>(Op::select, {&a[0], &a[1], &a[2]});
      case Builtin::hash: return map<2>(Op::hash, {&a[0], &a[1]});
      case Builtin::noise3: {
        int r = op(Op::noise3, a[0].r[0], a[0].r[1], a[0].r[2]);
        release(a[0]);
        return scalar(r);
      }
      case Builtin::vec3: return vec(a[0].r[0], a[1].r[0], a[2].r[0]);
      case Builtin::length: {
        int s = dot3(a[0], a[0]);
        release(a[0]);
        int r = op(Op::sqrt, s);
        free_reg(s);
        return scalar(r);
      }
      case Builtin::normalize: {
        int s = dot3(a[0], a[0]);
        int len = op(Op::sqrt, s);
        free_reg(s);
        Val out;
        out.width = 3;
        for (int k = 0; k < 3; ++k) out.r[k] = op(Op::div, a[0].r[k], len);
        release(a[0]);
        free_reg(len);
        return out;
      }
      case Builtin::dot: {
        int r = dot3(a[0], a[1]);
        release(a[0]);
        release(a[1]);
        return scalar(r);
      }
      case Builtin::cross: {
        const Val &u = a[0], &v = a[1];
        Val out;
        out.width = 3;
        for (int k = 0; k < 3; ++k) {
          int i1 = (k + 1) % 3, i2 = (k + 2) % 3;
          int p = op(Op::mul, u.r[i1], v.r[i2]);
          int q = op(Op::mul, u.r[i2], v.r[i1]);
          out.r[k] = op(Op::sub, p, q);
          free_reg(p);
          free_reg(q);
        }
        release(u);
        release(v);
        return out;
      }
      case Builtin::phase:
      case Builtin::ramp: {
        int t = op(Op::load, 0, 0, 0, 0, kTime);
        int T = op(Op::load, 0, 0, 0, 0, kDuration);
        Op o = n.builtin == Builtin::phase ? Op::phase : Op::ramp;
        int r = op(o, a[0].r[0], a[1].r[0], t, T);
        free_reg(t);
        free_reg(T);
        release(a[0]);
        release(a[1]);
        return scalar(r);
      }
    }
    return {};
  }

  // (x*x' + y*y') + z*z'; leaves operands live.
  int dot3(const Val& u, const Val& v) {
    int xx = op(Op::mul, u.r[0], v.r[0]);
    int yy = op(Op::mul, u.r[1], v.r[1]);
    int s = op(Op::add, xx, yy);
    free_reg(xx);
    free_reg(yy);
    int zz = op(Op::mul, u.r[2], v.r[2]);
    int r = op(Op::add, s, zz);
    free_reg(s);
    free_reg(zz);
    return r;
  }

  const Ast& ast_;
  std::vector<Instr> code_;
  std::vector<Val> lets_;
  std::vector<bool> free_, pinned_;
  std::vector<int> free_list_;
  int next_ = 0;
};

// ---------------------------------------------------------------------------

constexpr std::size_t kBlock = 256;

// Per-slot lane input: either a lane array or a uniform value.
struct Inputs {
  std::array<const double*, kSlotCount> lanes{};
  std::array<double, kSlotCount> uniform{};
};

inline double safe_div(double a, double b) { return b == 0.0 ? 0.0 : a / b; }

inline double safe_pow(double a, double b) {
  if (a < 0.0 && b != std::floor(b)) return 0.0;
  return std::pow(a, b);
}

inline double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

inline double smoothstep(double e0, double e1, double x) {
  double u;
  if (e1 == e0) {
    u = x < e0 ? 0.0 : 1.0;
  } else {
    u = clamp01((x - e0) / (e1 - e0));
  }
  return u * u * (3.0 - 2.0 * u);
}

inline double ramp(double t0, double t1, double t) {
  if (!(t1 > t0)) return t >= t0 ? 1.0 : 0.0;
  return clamp01((t - t0) / (t1 - t0));
}

inline double phase(double t0, double t1, double t, double T) {
  bool inside = t >= t0 && (t < t1 || (t == t1 && t1 >= T));
  return inside ? 1.0 : 0.0;
}

// Runs `code` over `lanes` lanes starting at lane offset `base` of the
// inputs. regs holds code.registers * kBlock doubles. bad[l] is set when
// lane l produced a non-finite intermediate.
void execute(const CompiledExpr& code, const Inputs& in, std::size_t base, std::size_t lanes,
             std::uint64_t seed, double* regs, std::uint8_t* bad) {
  for (const Instr& ins : code.code) {
    double* d = regs + ins.dst * kBlock;
    const double* a = regs + ins.a * kBlock;
    const double* b = regs + ins.b * kBlock;
    const double* c = regs + ins.c * kBlock;
    const double* e = regs + ins.d * kBlock;
    switch (ins.op) {
      case Op::konst:
        std::fill(d, d + lanes, ins.k);
        break;
      case Op::load: {
        int slot = static_cast<int>(ins.k);
        if (const double* src = in.lanes[slot])
          std::copy(src + base, src + base + lanes, d);
        else
          std::fill(d, d + lanes, in.uniform[slot]);
        break;
      }
#define PVFX_LANES(expr)                             \
  for (std::size_t l = 0; l < lanes; ++l) d[l] = (expr); \
  break;
      case Op::neg: PVFX_LANES(-a[l])
      case Op::add: PVFX_LANES(a[l] + b[l])
      case Op::sub: PVFX_LANES(a[l] - b[l])
      case Op::mul: PVFX_LANES(a[l] * b[l])
      case Op::div: PVFX_LANES(safe_div(a[l], b[l]))
      case Op::lt: PVFX_LANES(a[l] < b[l] ? 1.0 : 0.0)
      case Op::le: PVFX_LANES(a[l] <= b[l] ? 1.0 : 0.0)
      case Op::gt: PVFX_LANES(a[l] > b[l] ? 1.0 : 0.0)
      case Op::ge: PVFX_LANES(a[l] >= b[l] ? 1.0 : 0.0)
      case Op::eq: PVFX_LANES(a[l] == b[l] ? 1.0 : 0.0)
      case Op::ne: PVFX_LANES(a[l] != b[l] ? 1.0 : 0.0)
      case Op::sin: PVFX_LANES(std::sin(a[l]))
      case Op::cos: PVFX_LANES(std::cos(a[l]))
      case Op::exp: PVFX_LANES(std::exp(a[l]))
      case Op::sqrt: PVFX_LANES(a[l] > 0.0 ? std::sqrt(a[l]) : 0.0)
      case Op::abs: PVFX_LANES(std::fabs(a[l]))
      case Op::floor: PVFX_LANES(std::floor(a[l]))
      case Op::min: PVFX_LANES(b[l] < a[l] ? b[l] : a[l])
      case Op::max: PVFX_LANES(a[l] < b[l] ? b[l] : a[l])
      case Op::pow: PVFX_LANES(safe_pow(a[l], b[l]))
      case Op::clamp: PVFX_LANES(std::min(std::max(a[l], b[l]), c[l]))
      case Op::mix: PVFX_LANES(a[l] * (1.0 - c[l]) + b[l] * c[l])
      case Op::smoothstep: PVFX_LANES(smoothstep(a[l], b[l], c[l]))
      case Op::select: PVFX_LANES(a[l] != 0.0 ? b[l] : c[l])
      case Op::hash: PVFX_LANES(hash01(seed, a[l], b[l]))
      case Op::noise3: PVFX_LANES(value_noise3(seed, a[l], b[l], c[l]))
      case Op::phase: PVFX_LANES(phase(a[l], b[l], c[l], e[l]))
      case Op::ramp: PVFX_LANES(ramp(a[l], b[l], c[l]))
#undef PVFX_LANES
    }
    for (std::size_t l = 0; l < lanes; ++l) bad[l] |= !std::isfinite(d[l]);
  }
}

struct Scratch {
  std::vector<double> regs;
  std::vector<std::uint8_t> bad;
  double* prepare(const CompiledExpr& code) {
    std::size_t need = static_cast<std::size_t>(std::max(code.registers, 1)) * kBlock;
    if (regs.size() < need) regs.resize(need);
    bad.assign(kBlock, 0);
    return regs.data();
  }
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

// Evaluates all three attributes for lanes [base, base+lanes) into out.
void evaluate_block(const FieldProgram& program, std::uint64_t seed, const Inputs& in,
                    std::size_t base, std::size_t lanes, AttributeState* out,
                    std::size_t& fallbacks) {
  Scratch& s = scratch();
  auto input = [&](int slot, std::size_t l) {
    return in.lanes[slot] ? in.lanes[slot][base + l] : in.uniform[slot];
  };

  {
    const CompiledExpr& code = program.position_code();
    double* regs = s.prepare(code);
    execute(code, in, base, lanes, seed, regs, s.bad.data());
    const double* x = regs + code.result[0] * kBlock;
    const double* y = regs + code.result[1] * kBlock;
    const double* z = regs + code.result[2] * kBlock;
    for (std::size_t l = 0; l < lanes; ++l) {
      if (s.bad[l]) {
        out[l].position = {input(kP0, l), input(kP0 + 1, l), input(kP0 + 2, l)};
        ++fallbacks;
      } else {
        out[l].position = {x[l], y[l], z[l]};
      }
    }
  }
  {
    const CompiledExpr& code = program.color_code();
    double* regs = s.prepare(code);
    execute(code, in, base, lanes, seed, regs, s.bad.data());
    const double* r = regs + code.result[0] * kBlock;
    const double* g = regs + code.result[1] * kBlock;
    const double* b = regs + code.result[2] * kBlock;
    for (std::size_t l = 0; l < lanes; ++l) {
      if (s.bad[l]) {
        out[l].rgb = {clamp01(input(kC0, l)), clamp01(input(kC0 + 1, l)),
                      clamp01(input(kC0 + 2, l))};
        ++fallbacks;
      } else {
        out[l].rgb = {clamp01(r[l]), clamp01(g[l]), clamp01(b[l])};
      }
    }
  }
  {
    const CompiledExpr& code = program.alpha_code();
    double* regs = s.prepare(code);
    execute(code, in, base, lanes, seed, regs, s.bad.data());
    const double* a = regs + code.result[0] * kBlock;
    for (std::size_t l = 0; l < lanes; ++l) {
      if (s.bad[l]) {
        out[l].alpha = clamp01(input(kA0, l));
        ++fallbacks;
      } else {
        out[l].alpha = clamp01(a[l]);
      }
    }
  }
}

void set_uniform3(Inputs& in, int slot, Vec3 v) {
  in.uniform[slot] = v.x;
  in.uniform[slot + 1] = v.y;
  in.uniform[slot + 2] = v.z;
}

std::shared_ptr<const CompiledExpr> compile_attribute(const std::string& source, ValueType type,
                                                      const char* attribute) {
  try {
    return compile_expr(typecheck(parse(source), type));
  } catch (const ParseError& e) {
    throw ParseError(e.location(), std::string(attribute) + ": " + e.message());
  } catch (const TypeError& e) {
    throw TypeError(e.location(), std::string(attribute) + ": " + e.message());
  }
}

}  // namespace

std::shared_ptr<const CompiledExpr> compile_expr(const Ast& typed) {
  return Compiler(typed).run();
}

FieldProgram FieldProgram::compile(FieldSources sources, double duration, std::uint64_t seed) {
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw ArgumentError("duration must be positive and finite");
  FieldProgram p;
  p.position_ = compile_attribute(sources.position, ValueType::vec3, "position");
  p.color_ = compile_attribute(sources.color, ValueType::vec3, "color");
  p.alpha_ = compile_attribute(sources.alpha, ValueType::scalar, "alpha");
  p.sources_ = std::move(sources);
  p.duration_ = duration;
  p.seed_ = seed;
  return p;
}

FieldProgram FieldProgram::identity(double duration, std::uint64_t seed) {
  return compile(kIdentitySources, duration, seed);
}

AttributeState eval_attribute(const FieldProgram& program, const EvalEnv& env, EvalStats* stats) {
  Inputs in;
  set_uniform3(in, kP0, env.p0);
  set_uniform3(in, kC0, env.c0);
  in.uniform[kA0] = env.a0;
  in.uniform[kIndex] = env.i;
  in.uniform[kCount] = env.n;
  in.uniform[kTime] = env.t;
  in.uniform[kDuration] = env.T;
  set_uniform3(in, kCentroid, env.centroid);
  set_uniform3(in, kBboxMin, env.bbox_min);
  set_uniform3(in, kBboxMax, env.bbox_max);

  // The environment is the full input of a pointwise evaluation, so its
  // seed wins over the program's.
  AttributeState out;
  std::size_t fallbacks = 0;
  evaluate_block(program, env.seed, in, 0, 1, &out, fallbacks);
  if (stats) stats->nonfinite_fallbacks += fallbacks;
  return out;
}

// ---------------------------------------------------------------------------

BatchEvaluator::BatchEvaluator(const Scene& scene, const SelectionMask& mask) {
  std::size_t n = mask.size();
  for (auto* v : {&px_, &py_, &pz_, &cr_, &cg_, &cb_, &a_, &index_}) v->resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::uint32_t i = mask.indices()[k];
    const GaussianSplat& s = scene.splats[i];
    Vec3 rgb = dc_to_rgb(s.sh_dc);
    px_[k] = s.position.x;
    py_[k] = s.position.y;
    pz_[k] = s.position.z;
    cr_[k] = rgb.x;
    cg_[k] = rgb.y;
    cb_[k] = rgb.z;
    a_[k] = s.opacity;
    index_[k] = static_cast<double>(i);
  }
  if (n > 0) {
    Aabb box = bounds(scene, mask);
    bbox_min_ = box.min;
    bbox_max_ = box.max;
    centroid_ = pvfx::centroid(scene, mask);
  }
}

EvalEnv BatchEvaluator::env(std::size_t k, double t, const FieldProgram& program) const {
  EvalEnv e;
  e.p0 = {px_[k], py_[k], pz_[k]};
  e.c0 = {cr_[k], cg_[k], cb_[k]};
  e.a0 = a_[k];
  e.i = index_[k];
  e.n = static_cast<double>(size());
  e.t = t;
  e.T = program.duration();
  e.centroid = centroid_;
  e.bbox_min = bbox_min_;
  e.bbox_max = bbox_max_;
  e.seed = program.seed();
  return e;
}

void BatchEvaluator::evaluate(const FieldProgram& program, double t, std::span<AttributeState> out,
                              EvalStats* stats, unsigned max_threads) const {
  if (!(t >= 0.0 && t <= program.duration())) throw TimeRangeError(t, program.duration());
  if (out.size() != size()) throw ArgumentError("output span does not match selection size");

  Inputs in;
  in.lanes[kP0] = px_.data();
  in.lanes[kP0 + 1] = py_.data();
  in.lanes[kP0 + 2] = pz_.data();
  in.lanes[kC0] = cr_.data();
  in.lanes[kC0 + 1] = cg_.data();
  in.lanes[kC0 + 2] = cb_.data();
  in.lanes[kA0] = a_.data();
  in.lanes[kIndex] = index_.data();
  in.uniform[kCount] = static_cast<double>(size());
  in.uniform[kTime] = t;
  in.uniform[kDuration] = program.duration();
  set_uniform3(in, kCentroid, centroid_);
  set_uniform3(in, kBboxMin, bbox_min_);
  set_uniform3(in, kBboxMax, bbox_max_);

  std::size_t blocks = (size() + kBlock - 1) / kBlock;
  std::vector<std::size_t> fallbacks(blocks, 0);
  parallel_for(
      blocks, 16,
      [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
          std::size_t base = b * kBlock;
          std::size_t lanes = std::min(kBlock, size() - base);
          evaluate_block(program, program.seed(), in, base, lanes, out.data() + base,
                         fallbacks[b]);
        }
      },
      max_threads);
  if (stats)
    for (auto f : fallbacks) stats->nonfinite_fallbacks += f;
}

std::vector<AttributeState> eval_batch(const FieldProgram& program, const Scene& scene,
                                       const SelectionMask& mask, double t, EvalStats* stats) {
  if (!(t >= 0.0 && t <= program.duration())) throw TimeRangeError(t, program.duration());
  BatchEvaluator evaluator(scene, mask);
  std::vector<AttributeState> out(evaluator.size());
  evaluator.evaluate(program, t, out, stats);
  return out;
}

}  // namespace pvfx::field
