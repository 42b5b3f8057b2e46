#pragma once

#include <string>
#include <vector>

#include "promptvfx/field/program.hpp"
#include "promptvfx/llm/request.hpp"

namespace pvfx::fixtures {

inline constexpr const char* kVasePrompt =
    "move the vase up for two seconds, then dissolve it over one second";
inline constexpr const char* kVaseFeedback =
    "spin faster in the first second, fade more quickly in the final half-second";

struct VaseScript {
  std::vector<int> scores{62, 87, 55, 71};
  // Candidate whose first position reply does not compile.
  int broken_candidate = 3;
};

// Candidate sources the scripted model proposes.
field::FieldSources vase_candidate(int index);
field::FieldSources vase_feedback_revision();

// Deterministic stand-in for the model, keyed on request metadata.
llm::ChatResponse vase_reply(const llm::ChatRequest& request, const VaseScript& script = {});

}  // namespace pvfx::fixtures
