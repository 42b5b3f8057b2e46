#include "fixture_scripts.hpp"

#include <algorithm>
#include <stdexcept>

namespace pvfx::fixtures {

namespace {

llm::ChatResponse text(std::string s) { return {std::move(s), {}}; }

llm::ChatResponse code(const std::string& source) {
  return text("```\n" + source + "\n```");
}

const std::string& pick(const field::FieldSources& s, const std::string& attribute) {
  if (attribute == "centers") return s.position;
  if (attribute == "rgbs") return s.color;
  return s.alpha;
}

}  // namespace

field::FieldSources vase_candidate(int index) {
  switch (index % 4) {
    case 0:
      return {"return p0 + vec3(0, 0, 1.5 * ramp(0, 2));", "return c0;",
              "return a0 * (1 - ramp(2, 3));"};
    case 1:
      return {"return p0 + vec3(0, 0, 2 * ramp(0, 2));", "return c0;",
              "return a0 * (1 - ramp(2, 3));"};
    case 2:
      return {"return p0 + vec3(0, 0, 2 * smoothstep(0, 2, t));", "return c0;",
              "return a0 * (1 - smoothstep(2, 3, t));"};
    default:
      return {"let lift = 2 * ramp(0, 2);\n"
              "let sway = 0.05 * sin(6.2832 * t) * (1 - ramp(2, 3));\n"
              "return p0 + vec3(sway, 0, lift);",
              "return mix(c0, vec3(1, 0.9, 0.8), ramp(2, 3));",
              "return a0 * (1 - ramp(2.5, 3));"};
  }
}

field::FieldSources vase_feedback_revision() {
  return {"let d = p0 - centroid;\n"
          "let ang = 6.2832 * 2 * ramp(0, 1) + 6.2832 * 0.5 * ramp(1, 2);\n"
          "let r = vec3(d.x * cos(ang) - d.y * sin(ang), d.x * sin(ang) + d.y * cos(ang), d.z);\n"
          "return centroid + r + vec3(0, 0, 2 * ramp(0, 2));",
          "return c0;", "return a0 * (1 - ramp(2.5, 3));"};
}

llm::ChatResponse vase_reply(const llm::ChatRequest& request, const VaseScript& script) {
  const auto& meta = request.meta;
  std::string stage = meta.value("stage", "");
  std::string attribute = meta.value("attribute", "");
  if (stage == "design")
    return text(
        "```json\n"
        "{\"duration\": 3, \"phases\": ["
        "{\"name\": \"Phase 1\", \"start\": 0, \"end\": 2, \"description\": \"translate vase upward\"}, "
        "{\"name\": \"Phase 2\", \"start\": 2, \"end\": 3, \"description\": \"fade from opaque to transparent\"}]}\n"
        "```");
  if (stage == "behavior") {
    if (attribute == "centers")
      return text(
          "CENTERS:\nPhase 1 (0-2 s): every Gaussian of the vase moves straight up along z at "
          "constant speed, from its original height z0 to z0 + 2.\nPhase 2 (2-3 s): positions "
          "stay at z0 + 2.");
    if (attribute == "rgbs") return text("RGBS:\nColors stay unchanged for the whole animation.");
    return text(
        "OPACITIES:\nPhase 1 (0-2 s): opacity stays at its original value.\nPhase 2 (2-3 s): "
        "opacity falls linearly from the original value to 0, so the vase dissolves.");
  }
  if (stage == "codegen") {
    int candidate = meta.value("candidate", 0);
    int attempt = meta.value("attempt", 0);
    if (candidate == script.broken_candidate && attribute == "centers" && attempt == 0)
      return code("return p0 + vec3(0, 0, 2 * ramp(0, 2);");
    return code(pick(vase_candidate(candidate), attribute));
  }
  if (stage == "score") {
    int candidate = meta.value("candidate", 0);
    int s = script.scores.at(static_cast<std::size_t>(candidate) % script.scores.size());
    switch (candidate % 3) {
      case 0: return text(std::to_string(s));
      case 1: return text("Score: " + std::to_string(s));
      default: return text(std::to_string(s) + "/100");
    }
  }
  if (stage == "auto_refine") {
    // Already matches: return the selected program unchanged.
    auto best = std::max_element(script.scores.begin(), script.scores.end()) - script.scores.begin();
    return code(pick(vase_candidate(static_cast<int>(best)), attribute));
  }
  if (stage == "feedback") return code(pick(vase_feedback_revision(), attribute));
  throw std::runtime_error("vase script: unexpected stage '" + stage + "'");
}

}  // namespace pvfx::fixtures
