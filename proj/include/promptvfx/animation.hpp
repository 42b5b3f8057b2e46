#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "promptvfx/field/program.hpp"
#include "promptvfx/splat_io.hpp"

namespace pvfx {

inline constexpr double kDefaultFps = 30.0;
inline constexpr double kMinDuration = 0.5;
inline constexpr double kMaxDuration = 30.0;
inline constexpr double kPhaseTolerance = 1e-9;

double clamp_duration(double seconds);

struct Phase {
  std::string name;
  double t_start = 0.0;
  double t_end = 0.0;
  std::string description;
  friend bool operator==(const Phase&, const Phase&) = default;
};

// Ordered phases that should tile [0, total_duration].
struct PhasePlan {
  std::vector<Phase> phases;
  double total_duration = 0.0;
  friend bool operator==(const PhasePlan&, const PhasePlan&) = default;
};

// Throws BadIntervalError, PhaseGapError or PhaseOverlapError for the first
// offending phase (or pair of phases).
void validate_phases(const PhasePlan& plan);
bool phases_tile(const PhasePlan& plan);

// Snaps boundaries so the plan tiles [0, T]: first start -> 0, each start
// -> previous end, last end -> T. Returns nullopt if a phase collapses.
std::optional<PhasePlan> repair_phases(PhasePlan plan);

class Timeline {
 public:
  Timeline(double duration, double fps = kDefaultFps);
  double duration() const noexcept { return duration_; }
  double fps() const noexcept { return fps_; }
  // t_k = k / fps for k = 0 .. floor(T * fps).
  const std::vector<double>& times() const noexcept { return times_; }
  std::size_t size() const noexcept { return times_.size(); }

 private:
  double duration_, fps_;
  std::vector<double> times_;
};

// Attribute states for the selection at time t. Splats outside the mask
// keep their base attributes.
struct SceneState {
  std::shared_ptr<const Scene> base;
  SelectionMask mask;
  std::vector<field::AttributeState> states;  // aligned with mask
  double t = 0.0;
};

// Reuses per-selection inputs across many evaluations of the same scene.
class Animator {
 public:
  Animator(std::shared_ptr<const Scene> scene, SelectionMask mask);

  SceneState apply(const field::FieldProgram& program, double t,
                   field::EvalStats* stats = nullptr) const;
  std::vector<SceneState> sample(const field::FieldProgram& program, const Timeline& timeline,
                                 field::EvalStats* stats = nullptr) const;

  const std::shared_ptr<const Scene>& scene() const noexcept { return scene_; }
  const SelectionMask& mask() const noexcept { return mask_; }

 private:
  std::shared_ptr<const Scene> scene_;
  SelectionMask mask_;
  field::BatchEvaluator evaluator_;
};

SceneState apply_field(std::shared_ptr<const Scene> scene, const SelectionMask& mask,
                       const field::FieldProgram& program, double t);
std::vector<SceneState> sample_animation(std::shared_ptr<const Scene> scene,
                                         const SelectionMask& mask,
                                         const field::FieldProgram& program,
                                         const Timeline& timeline);

// Materializes a full scene with the state applied (for export/inspection).
Scene materialize(const SceneState& state);

}  // namespace pvfx
