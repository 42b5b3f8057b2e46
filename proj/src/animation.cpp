#include "promptvfx/animation.hpp"

#include <algorithm>
#include <cmath>

#include "promptvfx/error.hpp"

namespace pvfx {

double clamp_duration(double seconds) {
  if (!std::isfinite(seconds)) return kMaxDuration;
  return std::clamp(seconds, kMinDuration, kMaxDuration);
}

void validate_phases(const PhasePlan& plan) {
  const double T = plan.total_duration;
  if (!(T > 0.0) || !std::isfinite(T)) throw BadIntervalError("total duration must be positive");
  if (plan.phases.empty()) throw BadIntervalError("plan has no phases");
  for (const Phase& p : plan.phases) {
    if (!std::isfinite(p.t_start) || !std::isfinite(p.t_end) || !(p.t_start < p.t_end))
      throw BadIntervalError("phase '" + p.name + "' has empty or inverted interval");
  }
  const Phase& first = plan.phases.front();
  if (first.t_start < -kPhaseTolerance)
    throw BadIntervalError("phase '" + first.name + "' starts before 0");
  if (first.t_start > kPhaseTolerance) throw PhaseGapError(0.0, first.t_start);
  for (std::size_t k = 0; k + 1 < plan.phases.size(); ++k) {
    double end = plan.phases[k].t_end, next = plan.phases[k + 1].t_start;
    if (next > end + kPhaseTolerance) throw PhaseGapError(end, next);
    if (next < end - kPhaseTolerance) throw PhaseOverlapError(end, next);
  }
  const Phase& last = plan.phases.back();
  if (last.t_end < T - kPhaseTolerance) throw PhaseGapError(last.t_end, T);
  if (last.t_end > T + kPhaseTolerance)
    throw BadIntervalError("phase '" + last.name + "' ends after the total duration");
}

bool phases_tile(const PhasePlan& plan) {
  try {
    validate_phases(plan);
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::optional<PhasePlan> repair_phases(PhasePlan plan) {
  if (plan.phases.empty() || !(plan.total_duration > 0.0)) return std::nullopt;
  std::stable_sort(plan.phases.begin(), plan.phases.end(),
                   [](const Phase& a, const Phase& b) { return a.t_start < b.t_start; });
  plan.phases.front().t_start = 0.0;
  for (std::size_t k = 1; k < plan.phases.size(); ++k)
    plan.phases[k].t_start = plan.phases[k - 1].t_end;
  plan.phases.back().t_end = plan.total_duration;
  if (!phases_tile(plan)) return std::nullopt;
  return plan;
}

Timeline::Timeline(double duration, double fps) : duration_(duration), fps_(fps) {
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw ArgumentError("timeline duration must be positive");
  if (!(fps > 0.0) || !std::isfinite(fps)) throw ArgumentError("fps must be positive");
  auto last = static_cast<std::size_t>(std::floor(duration * fps + 1e-9));
  times_.reserve(last + 1);
  for (std::size_t k = 0; k <= last; ++k)
    times_.push_back(std::min(static_cast<double>(k) / fps, duration));
}

Animator::Animator(std::shared_ptr<const Scene> scene, SelectionMask mask)
    : scene_(std::move(scene)), mask_(std::move(mask)), evaluator_(*scene_, mask_) {}

SceneState Animator::apply(const field::FieldProgram& program, double t,
                           field::EvalStats* stats) const {
  SceneState s;
  s.base = scene_;
  s.mask = mask_;
  s.t = t;
  s.states.resize(mask_.size());
  evaluator_.evaluate(program, t, s.states, stats);
  return s;
}

std::vector<SceneState> Animator::sample(const field::FieldProgram& program,
                                         const Timeline& timeline, field::EvalStats* stats) const {
  if (timeline.duration() > program.duration())
    throw TimeRangeError(timeline.duration(), program.duration());
  std::vector<SceneState> out;
  out.reserve(timeline.size());
  for (double t : timeline.times()) out.push_back(apply(program, t, stats));
  return out;
}

SceneState apply_field(std::shared_ptr<const Scene> scene, const SelectionMask& mask,
                       const field::FieldProgram& program, double t) {
  if (!(t >= 0.0 && t <= program.duration())) throw TimeRangeError(t, program.duration());
  return Animator(std::move(scene), mask).apply(program, t);
}

std::vector<SceneState> sample_animation(std::shared_ptr<const Scene> scene,
                                         const SelectionMask& mask,
                                         const field::FieldProgram& program,
                                         const Timeline& timeline) {
  return Animator(std::move(scene), mask).sample(program, timeline);
}

Scene materialize(const SceneState& state) {
  Scene out = *state.base;
  for (std::size_t k = 0; k < state.mask.size(); ++k) {
    GaussianSplat& s = out.splats[state.mask.indices()[k]];
    const auto& a = state.states[k];
    s.position = a.position;
    s.sh_dc = rgb_to_dc(a.rgb);
    s.opacity = a.alpha;
  }
  return out;
}

}  // namespace pvfx
