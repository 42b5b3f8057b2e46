#include "promptvfx/llm/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "promptvfx/error.hpp"
#include "promptvfx/field/noise.hpp"
#include "promptvfx/field/parser.hpp"
#include "promptvfx/llm/scorer.hpp"
#include "promptvfx/log.hpp"
#include "promptvfx/parallel.hpp"
#include "promptvfx/render/png.hpp"

namespace pvfx::llm {

namespace {

struct AttributeSpec {
  const char* key;
  const char* header;
  const char* label;
  TemplateId behavior;
  TemplateId code;
  TemplateId auto_improve;
  TemplateId feedback;
  field::ValueType type;
  std::string field::FieldSources::*source;
  std::string Behaviors::*text;
};

const std::array<AttributeSpec, 3> kAttributes{{
    {"centers", "CENTERS:", "center position", TemplateId::centers_behavior,
     TemplateId::code_centers, TemplateId::auto_improve_centers, TemplateId::feedback_centers,
     field::ValueType::vec3, &field::FieldSources::position, &Behaviors::centers},
    {"rgbs", "RGBS:", "color", TemplateId::rgbs_behavior, TemplateId::code_rgbs,
     TemplateId::auto_improve_rgbs, TemplateId::feedback_rgbs, field::ValueType::vec3,
     &field::FieldSources::color, &Behaviors::rgbs},
    {"opacities", "OPACITIES:", "opacity", TemplateId::opacities_behavior,
     TemplateId::code_opacities, TemplateId::auto_improve_opacities, TemplateId::feedback_opacities,
     field::ValueType::scalar, &field::FieldSources::alpha, &Behaviors::opacities},
}};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string duration_text(double seconds) { return fmt("%.2f s", seconds); }

ChatMessage text_message(std::string role, std::string text) {
  return ChatMessage{std::move(role), std::move(text), {}};
}

json with(json meta, const char* key, json value) {
  meta[key] = std::move(value);
  return meta;
}

}  // namespace

// ---- helpers ----

std::string extract_code(std::string_view reply) {
  auto open = reply.find("```");
  if (open == std::string_view::npos) return trim(reply);
  auto body = reply.find('\n', open);
  if (body == std::string_view::npos) return trim(reply.substr(open + 3));
  auto close = reply.find("```", body);
  return trim(reply.substr(body + 1, close == std::string_view::npos ? std::string_view::npos
                                                                     : close - body - 1));
}

PhasePlan parse_phase_reply(std::string_view reply) {
  auto open = reply.find('{');
  auto close = reply.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open)
    throw FormatError("phases", "no JSON object in reply");
  json j;
  try {
    j = json::parse(reply.substr(open, close - open + 1));
  } catch (const json::exception& e) {
    throw FormatError("phases", e.what());
  }
  if (!j.is_object() || !j.contains("phases") || !j["phases"].is_array() || j["phases"].empty())
    throw FormatError("phases", "missing phase list");
  PhasePlan plan;
  for (std::size_t k = 0; k < j["phases"].size(); ++k) {
    const json& p = j["phases"][k];
    if (!p.is_object() || !p.contains("start") || !p.contains("end") ||
        !p["start"].is_number() || !p["end"].is_number())
      throw FormatError("phases", "phase " + std::to_string(k + 1) + " lacks numeric start/end");
    Phase phase;
    phase.name = p.contains("name") && p["name"].is_string() ? p["name"].get<std::string>()
                                                              : "Phase " + std::to_string(k + 1);
    phase.t_start = p["start"].get<double>();
    phase.t_end = p["end"].get<double>();
    if (p.contains("description") && p["description"].is_string())
      phase.description = p["description"].get<std::string>();
    if (!std::isfinite(phase.t_start) || !std::isfinite(phase.t_end))
      throw FormatError("phases", "non-finite phase time");
    plan.phases.push_back(std::move(phase));
  }
  double duration = plan.phases.back().t_end;
  if (j.contains("duration") && j["duration"].is_number()) duration = j["duration"].get<double>();
  if (!std::isfinite(duration) || duration <= 0.0)
    throw FormatError("phases", "invalid total duration");
  plan.total_duration = duration;
  return plan;
}

std::optional<std::string> parse_behavior_reply(std::string_view reply, std::string_view header) {
  std::size_t pos = 0;
  while (pos <= reply.size()) {
    std::size_t eol = reply.find('\n', pos);
    std::string_view line =
        reply.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    std::size_t b = 0;
    while (b < line.size() && (std::isspace(static_cast<unsigned char>(line[b])) ||
                               line[b] == '*' || line[b] == '#'))
      ++b;
    std::string_view rest = line.substr(b);
    bool match = rest.size() >= header.size();
    for (std::size_t k = 0; match && k < header.size(); ++k)
      match = std::toupper(static_cast<unsigned char>(rest[k])) == header[k];
    if (match) {
      std::string body(rest.substr(header.size()));
      if (eol != std::string_view::npos) body += std::string(reply.substr(eol));
      // Drop markdown emphasis left over from a bolded header.
      std::size_t s = 0;
      while (s < body.size() && body[s] == '*') ++s;
      std::string text = trim(std::string_view(body).substr(s));
      if (text.empty()) return std::nullopt;
      return text;
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  return std::nullopt;
}

std::string format_bbox(const Aabb& box) {
  auto v = [](Vec3 p) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "(%.3f, %.3f, %.3f)", p.x, p.y, p.z);
    return std::string(buf);
  };
  return "min " + v(box.min) + ", max " + v(box.max);
}

std::string format_phases(const PhasePlan& plan) {
  std::string out;
  for (const auto& p : plan.phases) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "- %s [%.2f s - %.2f s]: ", p.name.c_str(), p.t_start, p.t_end);
    out += buf + p.description + "\n";
  }
  return out;
}

std::string format_sources(const field::FieldSources& s) {
  return "position (vec3):\n```\n" + s.position + "\n```\ncolor (vec3):\n```\n" + s.color +
         "\n```\nopacity (scalar):\n```\n" + s.alpha + "\n```";
}

std::uint64_t candidate_seed(std::uint64_t job_seed, int index) {
  return field::splitmix64(job_seed + static_cast<std::uint64_t>(index)) & 0x7fffffffull;
}

void PipelineConfig::validate() const {
  if (m < 1 || m > 16) throw ArgumentError("m must be in [1, 16]");
  if (!(fps > 0.0) || !std::isfinite(fps)) throw ArgumentError("fps must be positive");
  if (auto_rounds < 0) throw ArgumentError("auto_rounds must be >= 0");
  if (duration_hint && (!(*duration_hint > 0.0) || !std::isfinite(*duration_hint)))
    throw ArgumentError("duration hint must be positive");
  if (preview_size < 8 || preview_size > 512) throw ArgumentError("preview size must be in [8, 512]");
  if (final_size < 8) throw ArgumentError("final size must be >= 8");
  if (score_times < 1 || score_views < 1) throw ArgumentError("need at least one score frame");
  if (max_retries < 0 || max_repairs < 0) throw ArgumentError("retry counts must be >= 0");
}

// ---- CallLog ----

void CallLog::add(TranscriptEntry entry) {
  std::lock_guard lock(mutex_);
  entries_.push_back(std::move(entry));
}

void CallLog::append(CallLog&& other) {
  auto moved = other.take();
  std::lock_guard lock(mutex_);
  for (auto& e : moved) entries_.push_back(std::move(e));
}

std::vector<TranscriptEntry> CallLog::take() {
  std::lock_guard lock(mutex_);
  return std::exchange(entries_, {});
}

std::size_t CallLog::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::vector<std::shared_ptr<const EncodedImage>> PreviewFrames::encoded() const {
  std::vector<std::shared_ptr<const EncodedImage>> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(EncodedImage::from_png(render::encode_png(img)));
  return out;
}

// ---- Pipeline ----

Pipeline::Pipeline(std::shared_ptr<Transport> transport, PipelineConfig config,
                   TemplateStore templates)
    : transport_(std::move(transport)), config_(std::move(config)),
      templates_(std::move(templates)) {
  if (!transport_) throw ArgumentError("pipeline needs a transport");
  config_.validate();
}

ChatResponse Pipeline::call(ChatRequest request, const std::string& stage, CallLog& log) {
  ChatResponse response = transport_->complete(request);
  log.add({request.hash(), stage, request.canonical(), response.to_json()});
  return response;
}

ChatRequest Pipeline::base_request(double temperature, std::optional<std::uint64_t> seed) const {
  ChatRequest r;
  r.model = config_.model;
  r.temperature = temperature;
  r.seed = seed;
  return r;
}

std::optional<std::string> Pipeline::request_source(ChatRequest request, const std::string& stage,
                                                    field::ValueType expected, CallLog& log,
                                                    std::string* diagnostic) {
  json meta = request.meta;
  for (int attempt = 0; attempt <= config_.max_repairs; ++attempt) {
    request.meta = with(meta, "attempt", attempt);
    ChatResponse reply = call(request, stage, log);
    std::string source = extract_code(reply.text);
    auto diag = field::check_source(source, expected);
    if (!diag) return source;
    if (diagnostic) *diagnostic = diag->kind + " at " + diag->message;
    request.messages.push_back(text_message("assistant", reply.text));
    request.messages.push_back(text_message(
        "user", "The program does not compile: " + diag->kind + " at " + diag->message +
                    "\nFix it and reply with the corrected program only, inside a single ``` "
                    "code block."));
  }
  return std::nullopt;
}

PhasePlan Pipeline::design_phase(const std::string& prompt, const Aabb& box, CallLog& log,
                                 std::span<const std::shared_ptr<const EncodedImage>> snapshots) {
  if (trim(prompt).empty()) throw ArgumentError("prompt must not be empty");
  ChatRequest req = base_request(config_.design_temperature, config_.seed);
  req.messages.push_back(text_message(
      "system", templates_.render(TemplateId::abstract_summary,
                                  {{"bbox", format_bbox(box)},
                                   {"duration", config_.duration_hint
                                                    ? duration_text(*config_.duration_hint)
                                                    : std::string("none")}})));
  ChatMessage user = text_message("user", "Animation description: " + prompt);
  user.images.assign(snapshots.begin(), snapshots.end());
  req.messages.push_back(std::move(user));

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    req.meta = {{"stage", "design"}, {"attempt", attempt}};
    ChatResponse reply = call(req, "design", log);
    PhasePlan plan;
    try {
      plan = parse_phase_reply(reply.text);
    } catch (const FormatError& e) {
      last_error = e.what();
      req.messages.push_back(text_message("assistant", reply.text));
      req.messages.push_back(text_message(
          "user", "Your answer could not be parsed (" + last_error +
                      "). Answer with the JSON object only, in exactly the requested shape."));
      continue;
    }
    plan.total_duration = clamp_duration(plan.total_duration);
    if (phases_tile(plan)) return plan;
    auto repaired = repair_phases(plan);
    if (!repaired) throw StageError("design", "phase plan does not tile [0, T] and cannot be repaired");
    log::warn("design: phase boundaries normalized to tile [0, " +
              fmt("%g", repaired->total_duration) + "]");
    return *repaired;
  }
  throw StageError("design", "unparseable phase plan after retries: " + last_error);
}

Behaviors Pipeline::derive_behaviors(const PhasePlan& plan, const std::string& prompt,
                                     const Aabb& box, CallLog& log) {
  validate_phases(plan);
  Behaviors out;
  for (const auto& attr : kAttributes) {
    ChatRequest req = base_request(config_.design_temperature, config_.seed);
    req.messages.push_back(text_message(
        "system", templates_.render(attr.behavior, {{"bbox", format_bbox(box)},
                                                    {"duration", duration_text(plan.total_duration)},
                                                    {"phases", format_phases(plan)}})));
    req.messages.push_back(text_message("user", "Animation description: " + prompt));
    std::optional<std::string> text;
    for (int attempt = 0; attempt <= config_.max_retries && !text; ++attempt) {
      req.meta = {{"stage", "behavior"}, {"attribute", attr.key}, {"attempt", attempt}};
      ChatResponse reply = call(req, "behavior", log);
      text = parse_behavior_reply(reply.text, attr.header);
      if (!text) {
        req.messages.push_back(text_message("assistant", reply.text));
        req.messages.push_back(text_message(
            "user", std::string("Start your answer with the line \"") + attr.header +
                        "\" followed by the behavior description."));
      }
    }
    if (!text) throw StageError("behavior", std::string("no ") + attr.header + " section in reply");
    out.*attr.text = std::move(*text);
  }
  return out;
}

field::FieldSources Pipeline::generate_program(const Behaviors& behaviors, const PhasePlan& plan,
                                               const std::string& prompt, const Aabb& box,
                                               std::uint64_t seed, double temperature,
                                               CallLog& log, const json& meta) {
  field::FieldSources sources;
  for (const auto& attr : kAttributes) {
    ChatRequest req = base_request(temperature, seed);
    req.messages.push_back(text_message(
        "system", templates_.render(attr.code, {{"behavior", behaviors.*attr.text},
                                                {"bbox", format_bbox(box)},
                                                {"duration", duration_text(plan.total_duration)},
                                                {"phases", format_phases(plan)},
                                                {"grammar", templates_.grammar_reference()}})));
    req.messages.push_back(text_message("user", "Animation description: " + prompt));
    req.meta = meta;
    req.meta["stage"] = "codegen";
    req.meta["attribute"] = attr.key;
    std::string diagnostic;
    auto source = request_source(std::move(req), "codegen", attr.type, log, &diagnostic);
    if (!source) throw StageError("codegen", std::string(attr.key) + ": " + diagnostic);
    sources.*attr.source = std::move(*source);
  }
  // Whole-program check (all three attributes together).
  field::FieldProgram::compile(sources, plan.total_duration, seed);
  return sources;
}

std::vector<Hypothesis> Pipeline::sample_hypotheses(const Behaviors& behaviors,
                                                    const PhasePlan& plan,
                                                    const std::string& prompt, const Aabb& box,
                                                    int m, CallLog& log) {
  if (m < 1) throw ArgumentError("m must be >= 1");
  std::vector<Hypothesis> out(static_cast<std::size_t>(m));
  std::vector<CallLog> logs(out.size());
  auto generate = [&](std::size_t j, int round) {
    Hypothesis& h = out[j];
    json meta = {{"candidate", j}};
    if (round > 0) meta["regenerate"] = round;
    try {
      h.sources = generate_program(behaviors, plan, prompt, box, h.seed, h.temperature, logs[j], meta);
    } catch (const StageError& e) {
      h.sources.reset();
      h.diagnostics.push_back(e.what());
    } catch (const ParseError& e) {
      h.sources.reset();
      h.diagnostics.push_back(e.what());
    } catch (const TypeError& e) {
      h.sources.reset();
      h.diagnostics.push_back(e.what());
    }
  };
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j].seed = candidate_seed(config_.seed, static_cast<int>(j));
    out[j].temperature = config_.candidate_temperature + config_.temperature_jitter * static_cast<double>(j);
  }
  parallel_for(out.size(), 1, [&](std::size_t b, std::size_t e) {
    for (std::size_t j = b; j < e; ++j) generate(j, 0);
  }, static_cast<unsigned>(config_.max_in_flight));

  // Identical sources are regenerated once, then kept.
  for (std::size_t j = 1; j < out.size(); ++j) {
    if (!out[j].sources) continue;
    bool duplicate = false;
    for (std::size_t k = 0; k < j && !duplicate; ++k)
      duplicate = out[k].sources && *out[k].sources == *out[j].sources;
    if (!duplicate) continue;
    auto previous = out[j].sources;
    generate(j, 1);
    if (!out[j].sources) out[j].sources = previous;
    out[j].diagnostics.push_back("duplicate of an earlier candidate; regenerated once");
  }
  for (auto& l : logs) log.append(std::move(l));

  bool any = std::any_of(out.begin(), out.end(), [](const Hypothesis& h) { return h.sources.has_value(); });
  if (!any) {
    std::string detail = "no candidate compiled";
    if (!out.front().diagnostics.empty()) detail += ": " + out.front().diagnostics.front();
    throw StageError("codegen", detail);
  }
  return out;
}

Aabb animated_bounds(const Animator& animator, const field::FieldProgram& program) {
  const Scene& scene = *animator.scene();
  Aabb box = bounds(scene, SelectionMask::all(scene.size()));
  constexpr int kSamples = 5;
  for (int k = 0; k < kSamples; ++k) {
    SceneState s = animator.apply(program, program.duration() * k / (kSamples - 1));
    for (const auto& a : s.states) {
      box.min = cwise_min(box.min, a.position);
      box.max = cwise_max(box.max, a.position);
    }
  }
  return box;
}

PreviewFrames Pipeline::render_preview(const Animator& animator,
                                       const field::FieldProgram& program) const {
  Aabb box = animated_bounds(animator, program);
  auto cameras = render::orbit_cameras(box, config_.score_views);
  PreviewFrames frames;
  frames.views = config_.score_views;
  double T = program.duration();
  for (int k = 0; k < config_.score_times; ++k)
    frames.times.push_back(config_.score_times == 1 ? 0.0
                                                    : std::min(T, T * k / (config_.score_times - 1)));
  std::vector<SceneState> states;
  for (double t : frames.times) states.push_back(animator.apply(program, t));
  int size = std::min(config_.preview_size, 512);
  for (const auto& cam : cameras)
    for (const auto& state : states)
      frames.images.push_back(render::rasterize(state, cam, size, size, config_.background));
  return frames;
}

ScoreResult Pipeline::score_hypothesis(const PreviewFrames& frames, const std::string& prompt,
                                       const json& meta, CallLog& log) {
  if (frames.images.empty()) throw ArgumentError("scoring needs at least one frame");
  ScoreResult result;
  if (config_.mock_scorer) {
    std::size_t per_view = frames.times.size();
    double total = 0.0;
    int views = 0;
    for (std::size_t v = 0; v + per_view <= frames.images.size(); v += per_view, ++views)
      total += mock_score(std::span(frames.images).subspan(v, per_view));
    result.score = views ? static_cast<int>(std::lround(total / views)) : 0;
    return result;
  }
  ChatRequest req = base_request(0.0, std::nullopt);
  req.messages.push_back(
      text_message("system", templates_.render(TemplateId::score_animation, {{"prompt", prompt}})));
  std::string times;
  for (double t : frames.times) times += (times.empty() ? "" : ", ") + fmt("%.2f s", t);
  ChatMessage user = text_message(
      "user", std::to_string(frames.images.size()) + " frames: " + std::to_string(frames.views) +
                  " viewpoints, each at t = " + times + ".");
  user.images = frames.encoded();
  req.messages.push_back(std::move(user));
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    req.meta = meta;
    req.meta["stage"] = "score";
    req.meta["attempt"] = attempt;
    ChatResponse reply = call(req, "score", log);
    if (auto parsed = parse_score(reply.text)) {
      result.score = parsed->value;
      if (parsed->clamped) {
        std::string msg = "score " + fmt("%g", parsed->raw) + " clamped to " +
                          std::to_string(parsed->value);
        log::warn(msg);
        result.diagnostics.push_back(msg);
      }
      return result;
    }
    req.messages.push_back(text_message("assistant", reply.text));
    req.messages.push_back(
        text_message("user", "Reply with a single integer from 0 to 100 and nothing else."));
  }
  result.score = 0;
  result.diagnostics.push_back("unparseable score reply; scored 0");
  log::warn("scoring: unparseable reply, candidate scored 0");
  return result;
}

RefineResult Pipeline::auto_refine(const field::FieldProgram& program, const Animator& animator,
                                   const std::string& prompt, const PhasePlan& plan, int rounds,
                                   CallLog& log, std::vector<Refinement>* history) {
  if (rounds < 0) throw ArgumentError("rounds must be >= 0");
  RefineResult result{program.sources(), false, {}};
  field::FieldProgram current = program;
  for (int round = 0; round < rounds; ++round) {
    PreviewFrames frames = render_preview(animator, current);
    auto images = frames.encoded();
    field::FieldSources revised = current.sources();
    bool ok = true;
    for (const auto& attr : kAttributes) {
      ChatRequest req = base_request(config_.design_temperature, program.seed());
      req.messages.push_back(text_message(
          "system", templates_.render(attr.auto_improve, {{"grammar", templates_.grammar_reference()}})));
      ChatMessage user = text_message(
          "user", templates_.render(TemplateId::auto_improve_user,
                                    {{"prompt", prompt},
                                     {"duration", duration_text(plan.total_duration)},
                                     {"phases", format_phases(plan)},
                                     {"sources", format_sources(current.sources())},
                                     {"frames", std::to_string(images.size())},
                                     {"attribute", attr.label}}));
      user.images = images;
      req.messages.push_back(std::move(user));
      req.meta = {{"stage", "auto_refine"}, {"round", round}, {"attribute", attr.key}};
      std::string diagnostic;
      auto source = request_source(std::move(req), "auto_refine", attr.type, log, &diagnostic);
      if (!source) {
        ok = false;
        result.diagnostics.push_back("auto refinement round " + std::to_string(round + 1) + ", " +
                                     attr.key + ": " + diagnostic);
        break;
      }
      revised.*attr.source = std::move(*source);
    }
    if (!ok) {
      log::warn(result.diagnostics.back() + "; keeping the previous program");
      continue;
    }
    try {
      current = field::FieldProgram::compile(revised, program.duration(), program.seed());
    } catch (const Error& e) {
      result.diagnostics.push_back(e.what());
      continue;
    }
    if (history)
      history->push_back({"auto", "round " + std::to_string(round + 1), revised,
                          !(revised == result.sources)});
    result.sources = revised;
  }
  result.changed = !(result.sources == program.sources());
  return result;
}

RefineResult Pipeline::feedback_refine(const field::FieldProgram& program,
                                       const PreviewFrames& frames, const std::string& prompt,
                                       const PhasePlan& plan, const std::string& feedback,
                                       CallLog& log) {
  if (trim(feedback).empty()) throw ArgumentError("feedback must not be empty");
  (void)plan;
  RefineResult result{program.sources(), false, {}};
  auto images = frames.encoded();
  field::FieldSources revised = program.sources();
  for (const auto& attr : kAttributes) {
    ChatRequest req = base_request(config_.design_temperature, program.seed());
    req.messages.push_back(text_message(
        "system", templates_.render(attr.feedback, {{"grammar", templates_.grammar_reference()}})));
    ChatMessage user = text_message(
        "user", templates_.render(TemplateId::feedback_user,
                                  {{"prompt", prompt},
                                   {"sources", format_sources(program.sources())},
                                   {"frames", std::to_string(images.size())},
                                   {"feedback", feedback},
                                   {"attribute", attr.label}}));
    user.images = images;
    req.messages.push_back(std::move(user));
    req.meta = {{"stage", "feedback"}, {"attribute", attr.key}};
    std::string diagnostic;
    auto source = request_source(std::move(req), "feedback", attr.type, log, &diagnostic);
    if (!source) {
      result.diagnostics.push_back(std::string("feedback ") + attr.key + ": " + diagnostic +
                                   "; program unchanged");
      log::warn(result.diagnostics.back());
      return result;
    }
    revised.*attr.source = std::move(*source);
  }
  try {
    field::FieldProgram::compile(revised, program.duration(), program.seed());
  } catch (const Error& e) {
    result.diagnostics.push_back(std::string(e.what()) + "; program unchanged");
    return result;
  }
  result.changed = !(revised == program.sources());
  result.sources = std::move(revised);
  return result;
}

render::Camera Pipeline::final_camera(const Animator& animator,
                                      const field::FieldProgram& program) const {
  if (config_.camera) return *config_.camera;
  return render::orbit_cameras(animated_bounds(animator, program), 1).front();
}

std::size_t Pipeline::render_final(const Animator& animator, const field::FieldProgram& program,
                                   const JobHooks& hooks) const {
  Timeline timeline(program.duration(), config_.fps);
  render::Camera camera = final_camera(animator, program);
  const auto& times = timeline.times();
  std::size_t chunk = std::max<std::size_t>(2, 2 * worker_count());
  for (std::size_t b = 0; b < times.size(); b += chunk) {
    std::size_t e = std::min(times.size(), b + chunk);
    std::vector<SceneState> states;
    for (std::size_t k = b; k < e; ++k) states.push_back(animator.apply(program, times[k]));
    auto images = render::render_frames(states, camera, config_.final_size, config_.final_size,
                                        config_.background);
    if (hooks.on_frame)
      for (std::size_t k = b; k < e; ++k) hooks.on_frame(k, images[k - b]);
  }
  return times.size();
}

AnimationJob Pipeline::run_job(std::shared_ptr<const Scene> scene, const SelectionMask& mask,
                               AnimationJob job, const JobHooks& hooks) {
  auto notify = [&] {
    if (hooks.on_update) hooks.on_update(job);
  };
  if (job.created_at.empty()) job.created_at = config_.zero_timestamps ? "" : utc_timestamp();
  job.fps = config_.fps;
  job.seed = config_.seed;
  CallLog log;
  std::string stage = "design";
  auto flush = [&] {
    for (auto& e : log.take()) job.transcript.push_back(std::move(e));
  };
  try {
    if (trim(job.prompt).empty()) throw ArgumentError("prompt must not be empty");
    Animator animator(scene, mask);
    Aabb box = bounds(*scene, mask);

    job.advance(JobStatus::designing);
    notify();
    job.phases = design_phase(job.prompt, box, log);
    stage = "behavior";
    job.behaviors = derive_behaviors(job.phases, job.prompt, box, log);
    flush();
    notify();

    stage = "codegen";
    job.advance(JobStatus::generating);
    notify();
    job.hypotheses = sample_hypotheses(job.behaviors, job.phases, job.prompt, box, config_.m, log);
    flush();

    stage = "scoring";
    job.advance(JobStatus::scoring);
    notify();
    std::vector<CallLog> logs(job.hypotheses.size());
    parallel_for(job.hypotheses.size(), 1, [&](std::size_t b, std::size_t e) {
      for (std::size_t j = b; j < e; ++j) {
        Hypothesis& h = job.hypotheses[j];
        if (!h.sources) continue;
        auto program = field::FieldProgram::compile(*h.sources, job.phases.total_duration, h.seed);
        PreviewFrames frames = render_preview(animator, program);
        for (const auto& img : frames.encoded()) h.frame_digests.push_back(img->sha256);
        ScoreResult s = score_hypothesis(frames, job.prompt, {{"candidate", j}}, logs[j]);
        h.score = s.score;
        for (auto& d : s.diagnostics) h.diagnostics.push_back(std::move(d));
      }
    }, static_cast<unsigned>(config_.max_in_flight));
    for (auto& l : logs) log.append(std::move(l));
    flush();

    std::vector<std::optional<int>> scores;
    for (const auto& h : job.hypotheses) scores.push_back(h.score);
    job.selected_index = select_best(scores);
    if (!job.selected_index) throw StageError("scoring", "no candidate could be scored");
    job.selected = job.hypotheses[*job.selected_index].sources;
    notify();

    stage = "refine";
    job.advance(JobStatus::refining);
    notify();
    field::FieldProgram program = job.program();
    RefineResult refined = auto_refine(program, animator, job.prompt, job.phases,
                                       config_.auto_rounds, log, &job.refinements);
    flush();
    for (auto& d : refined.diagnostics) job.diagnostics.push_back(std::move(d));
    if (refined.changed) {
      job.selected = refined.sources;
      program = job.program();
    }
    notify();

    stage = "render";
    if (config_.render_final) job.frame_count = render_final(animator, program, hooks);
    job.advance(JobStatus::done);
  } catch (const StageError& e) {
    flush();
    job.failed_stage = e.stage();
    job.diagnostics.push_back(e.what());
    job.advance(JobStatus::failed);
  } catch (const Error& e) {
    flush();
    job.failed_stage = stage;
    job.diagnostics.push_back(e.what());
    job.advance(JobStatus::failed);
  }
  job.finished_at = config_.zero_timestamps ? "" : utc_timestamp();
  notify();
  return job;
}

AnimationJob Pipeline::revise(const AnimationJob& parent, std::shared_ptr<const Scene> scene,
                              const SelectionMask& mask, const std::string& feedback,
                              std::uint64_t new_id, const JobHooks& hooks) {
  if (trim(feedback).empty()) throw ArgumentError("feedback must not be empty");
  if (parent.status != JobStatus::done)
    throw ArgumentError("job " + std::to_string(parent.id) + " is not done");
  AnimationJob job;
  job.id = new_id;
  job.parent = parent.id;
  job.prompt = parent.prompt;
  job.fps = parent.fps;
  job.seed = parent.seed;
  job.phases = parent.phases;
  job.behaviors = parent.behaviors;
  job.hypotheses = parent.hypotheses;
  job.selected_index = parent.selected_index;
  job.selected = parent.selected;
  job.refinements = parent.refinements;
  job.created_at = config_.zero_timestamps ? "" : utc_timestamp();
  auto notify = [&] {
    if (hooks.on_update) hooks.on_update(job);
  };
  CallLog log;
  std::string stage = "feedback";
  try {
    Animator animator(scene, mask);
    job.advance(JobStatus::refining);
    notify();
    field::FieldProgram program = parent.program();
    PreviewFrames frames = render_preview(animator, program);
    RefineResult refined = feedback_refine(program, frames, job.prompt, job.phases, feedback, log);
    for (auto& d : refined.diagnostics) job.diagnostics.push_back(std::move(d));
    job.refinements.push_back({"feedback", feedback, refined.sources, refined.changed});
    job.selected = refined.sources;
    program = job.program();
    for (auto& e : log.take()) job.transcript.push_back(std::move(e));
    notify();
    stage = "render";
    if (config_.render_final) job.frame_count = render_final(animator, program, hooks);
    job.advance(JobStatus::done);
  } catch (const Error& e) {
    for (auto& entry : log.take()) job.transcript.push_back(std::move(entry));
    job.failed_stage = stage;
    job.diagnostics.push_back(e.what());
    job.advance(JobStatus::failed);
  }
  job.finished_at = config_.zero_timestamps ? "" : utc_timestamp();
  notify();
  return job;
}

}  // namespace pvfx::llm
