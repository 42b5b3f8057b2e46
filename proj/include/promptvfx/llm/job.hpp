#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "promptvfx/animation.hpp"
#include "promptvfx/field/program.hpp"
#include "promptvfx/llm/request.hpp"

namespace pvfx::llm {

enum class JobStatus { queued, designing, generating, scoring, refining, done, failed };

std::string_view to_string(JobStatus status);
JobStatus parse_job_status(std::string_view text);
// Forward along the listed order (skipping allowed), or to failed from any
// non-terminal state.
bool can_transition(JobStatus from, JobStatus to);
bool is_terminal(JobStatus status);

struct Behaviors {
  std::string centers;
  std::string rgbs;
  std::string opacities;
  friend bool operator==(const Behaviors&, const Behaviors&) = default;
};

struct Hypothesis {
  std::optional<field::FieldSources> sources;  // nullopt when codegen failed
  std::uint64_t seed = 0;
  double temperature = 0.0;
  std::optional<int> score;
  std::vector<std::string> frame_digests;  // SHA-256 of the scored frames
  std::vector<std::string> diagnostics;
};

struct Refinement {
  std::string kind;   // auto | feedback
  std::string input;  // feedback text, or the round label
  field::FieldSources sources;
  bool changed = false;
};

// One model exchange as seen by a job.
struct TranscriptEntry {
  std::string hash;
  std::string stage;
  json request;  // canonical
  json response;
};

struct AnimationJob {
  std::uint64_t id = 0;
  std::optional<std::uint64_t> parent;
  std::string prompt;
  JobStatus status = JobStatus::queued;
  std::string failed_stage;
  std::vector<std::string> diagnostics;

  double fps = 30.0;
  std::uint64_t seed = 1;
  PhasePlan phases;
  Behaviors behaviors;
  std::vector<Hypothesis> hypotheses;
  std::optional<std::size_t> selected_index;
  std::optional<field::FieldSources> selected;
  std::vector<Refinement> refinements;
  std::size_t frame_count = 0;
  std::vector<TranscriptEntry> transcript;

  std::string created_at;
  std::string finished_at;

  // Moves along the status order. Throws ArgumentError on a backwards step.
  void advance(JobStatus next);

  // The selected program compiled with the plan's duration.
  field::FieldProgram program() const;
  std::uint64_t program_seed() const;

  json to_json() const;
  // Compact view for pollers: no transcript, no behaviors text.
  json status_view() const;
};

json to_json(const PhasePlan& plan);
PhasePlan phase_plan_from_json(const json& j);
json to_json(const field::FieldSources& sources);
field::FieldSources sources_from_json(const json& j);

}  // namespace pvfx::llm
