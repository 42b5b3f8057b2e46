#include "promptvfx/llm/job.hpp"

#include <array>

#include "promptvfx/error.hpp"

namespace pvfx::llm {

namespace {

constexpr std::array<std::string_view, 7> kStatusNames{"queued",  "designing", "generating",
                                                       "scoring", "refining",  "done",
                                                       "failed"};

json optional_json(const auto& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string_view to_string(JobStatus status) { return kStatusNames[static_cast<int>(status)]; }

JobStatus parse_job_status(std::string_view text) {
  for (std::size_t k = 0; k < kStatusNames.size(); ++k)
    if (kStatusNames[k] == text) return static_cast<JobStatus>(k);
  throw ArgumentError("unknown job status '" + std::string(text) + "'");
}

bool is_terminal(JobStatus status) {
  return status == JobStatus::done || status == JobStatus::failed;
}

bool can_transition(JobStatus from, JobStatus to) {
  if (is_terminal(from)) return false;
  if (to == JobStatus::failed) return true;
  return static_cast<int>(to) >= static_cast<int>(from);
}

void AnimationJob::advance(JobStatus next) {
  if (!can_transition(status, next))
    throw ArgumentError("job " + std::to_string(id) + " cannot go from " +
                        std::string(to_string(status)) + " to " + std::string(to_string(next)));
  status = next;
}

std::uint64_t AnimationJob::program_seed() const {
  if (selected_index && *selected_index < hypotheses.size())
    return hypotheses[*selected_index].seed;
  return seed;
}

field::FieldProgram AnimationJob::program() const {
  if (!selected) throw ArgumentError("job " + std::to_string(id) + " has no selected program");
  return field::FieldProgram::compile(*selected, phases.total_duration, program_seed());
}

json to_json(const PhasePlan& plan) {
  json phases = json::array();
  for (const auto& p : plan.phases)
    phases.push_back(
        {{"name", p.name}, {"start", p.t_start}, {"end", p.t_end}, {"description", p.description}});
  return {{"duration", plan.total_duration}, {"phases", std::move(phases)}};
}

PhasePlan phase_plan_from_json(const json& j) {
  PhasePlan plan;
  plan.total_duration = j.at("duration").get<double>();
  for (const auto& p : j.at("phases"))
    plan.phases.push_back({p.value("name", ""), p.at("start").get<double>(),
                           p.at("end").get<double>(), p.value("description", "")});
  return plan;
}

json to_json(const field::FieldSources& s) {
  return {{"position", s.position}, {"color", s.color}, {"alpha", s.alpha}};
}

field::FieldSources sources_from_json(const json& j) {
  return {j.at("position").get<std::string>(), j.at("color").get<std::string>(),
          j.at("alpha").get<std::string>()};
}

json AnimationJob::status_view() const {
  json scores = json::array();
  for (const auto& h : hypotheses) scores.push_back(optional_json(h.score));
  json j = {{"id", id},
            {"parent", optional_json(parent)},
            {"prompt", prompt},
            {"status", to_string(status)},
            {"failed_stage", failed_stage},
            {"diagnostics", diagnostics},
            {"phases", phases.phases.empty() ? json(nullptr) : llm::to_json(phases)},
            {"scores", std::move(scores)},
            {"selected_index", optional_json(selected_index)},
            {"selected", selected ? llm::to_json(*selected) : json(nullptr)},
            {"revision_count", refinements.size()},
            {"fps", fps},
            {"frame_count", frame_count}};
  return j;
}

json AnimationJob::to_json() const {
  json j = status_view();
  j["seed"] = seed;
  j["behaviors"] = {
      {"centers", behaviors.centers}, {"rgbs", behaviors.rgbs}, {"opacities", behaviors.opacities}};
  json hyps = json::array();
  for (std::size_t k = 0; k < hypotheses.size(); ++k) {
    const auto& h = hypotheses[k];
    hyps.push_back({{"index", k},
                    {"seed", h.seed},
                    {"temperature", h.temperature},
                    {"sources", h.sources ? llm::to_json(*h.sources) : json(nullptr)},
                    {"score", optional_json(h.score)},
                    {"frame_digests", h.frame_digests},
                    {"diagnostics", h.diagnostics}});
  }
  j["hypotheses"] = std::move(hyps);
  json refs = json::array();
  for (const auto& r : refinements)
    refs.push_back({{"kind", r.kind},
                    {"input", r.input},
                    {"sources", llm::to_json(r.sources)},
                    {"changed", r.changed}});
  j["refinements"] = std::move(refs);
  json tr = json::array();
  for (const auto& e : transcript)
    tr.push_back(
        {{"hash", e.hash}, {"stage", e.stage}, {"request", e.request}, {"response", e.response}});
  j["transcript"] = std::move(tr);
  j["created_at"] = created_at;
  j["finished_at"] = finished_at;
  return j;
}

}  // namespace pvfx::llm
