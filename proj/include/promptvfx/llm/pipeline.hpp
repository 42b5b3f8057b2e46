#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "promptvfx/animation.hpp"
#include "promptvfx/llm/job.hpp"
#include "promptvfx/llm/templates.hpp"
#include "promptvfx/llm/transport.hpp"
#include "promptvfx/render/camera.hpp"
#include "promptvfx/render/raster.hpp"

namespace pvfx::llm {

struct PipelineConfig {
  int m = 4;
  double fps = kDefaultFps;
  int auto_rounds = 1;
  std::optional<double> duration_hint;
  std::uint64_t seed = 1;
  std::string model = "gpt-4o";

  double design_temperature = 0.2;
  double candidate_temperature = 0.7;
  double temperature_jitter = 0.1;  // added per candidate index
  int max_retries = 2;              // unparseable design/behavior/score replies
  int max_repairs = 3;              // compile-error feedback rounds

  int preview_size = 256;  // frames sent to the model, max side
  int final_size = 512;
  int score_times = 3;
  int score_views = 2;
  bool mock_scorer = false;
  Vec3 background{1.0, 1.0, 1.0};
  int max_in_flight = 2;
  bool render_final = true;
  bool zero_timestamps = false;
  std::optional<render::Camera> camera;  // final frames; default orbit view

  // Throws ArgumentError for out-of-range settings.
  void validate() const;
};

// Thread-safe, append-only log of model exchanges.
class CallLog {
 public:
  void add(TranscriptEntry entry);
  void append(CallLog&& other);
  std::vector<TranscriptEntry> take();
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::vector<TranscriptEntry> entries_;
};

struct JobHooks {
  std::function<void(const AnimationJob&)> on_update;
  std::function<void(std::size_t, const render::Image&)> on_frame;
};

struct RefineResult {
  field::FieldSources sources;
  bool changed = false;
  std::vector<std::string> diagnostics;
};

struct ScoreResult {
  int score = 0;
  std::vector<std::string> diagnostics;
};

// Snapshots of an animation: for each viewpoint, frames at evenly spaced
// times from 0 to T.
struct PreviewFrames {
  std::vector<render::Image> images;  // view-major
  std::vector<double> times;
  int views = 0;
  std::vector<std::shared_ptr<const EncodedImage>> encoded() const;
};

class Pipeline {
 public:
  Pipeline(std::shared_ptr<Transport> transport, PipelineConfig config,
           TemplateStore templates = TemplateStore::embedded());

  const PipelineConfig& config() const noexcept { return config_; }

  PhasePlan design_phase(const std::string& prompt, const Aabb& box, CallLog& log,
                         std::span<const std::shared_ptr<const EncodedImage>> snapshots = {});
  Behaviors derive_behaviors(const PhasePlan& plan, const std::string& prompt, const Aabb& box,
                             CallLog& log);
  // Throws StageError(codegen) when an attribute still fails to compile
  // after the repair rounds.
  field::FieldSources generate_program(const Behaviors& behaviors, const PhasePlan& plan,
                                       const std::string& prompt, const Aabb& box,
                                       std::uint64_t seed, double temperature, CallLog& log,
                                       const json& meta = json::object());
  std::vector<Hypothesis> sample_hypotheses(const Behaviors& behaviors, const PhasePlan& plan,
                                            const std::string& prompt, const Aabb& box, int m,
                                            CallLog& log);

  PreviewFrames render_preview(const Animator& animator, const field::FieldProgram& program) const;
  ScoreResult score_hypothesis(const PreviewFrames& frames, const std::string& prompt,
                               const json& meta, CallLog& log);

  RefineResult auto_refine(const field::FieldProgram& program, const Animator& animator,
                           const std::string& prompt, const PhasePlan& plan, int rounds,
                           CallLog& log, std::vector<Refinement>* history = nullptr);
  RefineResult feedback_refine(const field::FieldProgram& program, const PreviewFrames& frames,
                               const std::string& prompt, const PhasePlan& plan,
                               const std::string& feedback, CallLog& log);

  // Full run. Never throws for pipeline failures; the returned job is
  // either done or failed with the stage recorded.
  AnimationJob run_job(std::shared_ptr<const Scene> scene, const SelectionMask& mask,
                       AnimationJob job, const JobHooks& hooks = {});
  // A new revision of a finished job driven by user feedback. Throws
  // ArgumentError for empty feedback or a parent that is not done.
  AnimationJob revise(const AnimationJob& parent, std::shared_ptr<const Scene> scene,
                      const SelectionMask& mask, const std::string& feedback,
                      std::uint64_t new_id, const JobHooks& hooks = {});

  // Renders the final frame sequence and returns the frame count.
  std::size_t render_final(const Animator& animator, const field::FieldProgram& program,
                           const JobHooks& hooks) const;
  render::Camera final_camera(const Animator& animator, const field::FieldProgram& program) const;

 private:
  ChatResponse call(ChatRequest request, const std::string& stage, CallLog& log);
  ChatRequest base_request(double temperature, std::optional<std::uint64_t> seed) const;
  // Asks for one attribute's source, feeding compile diagnostics back.
  std::optional<std::string> request_source(ChatRequest request, const std::string& stage,
                                            field::ValueType expected, CallLog& log,
                                            std::string* diagnostic);

  std::shared_ptr<Transport> transport_;
  PipelineConfig config_;
  TemplateStore templates_;
};

// Text inside the first ``` fence (language tag dropped), or the whole
// reply when there is no fence.
std::string extract_code(std::string_view reply);
// Parses the design stage reply. Throws FormatError("phases") when the
// reply is not a usable phase list.
PhasePlan parse_phase_reply(std::string_view reply);
// Text following a "CENTERS:" style header line; nullopt when absent.
std::optional<std::string> parse_behavior_reply(std::string_view reply, std::string_view header);

std::string format_bbox(const Aabb& box);
std::string format_phases(const PhasePlan& plan);
std::string format_sources(const field::FieldSources& sources);
std::uint64_t candidate_seed(std::uint64_t job_seed, int index);
// Scene bounds grown by the selection's positions at five evenly spaced
// times, so cameras keep moving objects in view.
Aabb animated_bounds(const Animator& animator, const field::FieldProgram& program);

}  // namespace pvfx::llm
