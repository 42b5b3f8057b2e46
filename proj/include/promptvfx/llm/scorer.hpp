#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "promptvfx/render/raster.hpp"

namespace pvfx::llm {

struct ParsedScore {
  int value = 0;         // in [0, 100]
  bool clamped = false;  // the model's number was out of range
  double raw = 0.0;
};

// First number in the text, rounded half away from zero and clamped to
// [0, 100]. nullopt when the text holds no number.
std::optional<ParsedScore> parse_score(std::string_view text);

// Frame-difference heuristic: min(100, round(1000 * mean |dRGB| / 255))
// over consecutive frames. Meant only for exercising selection logic.
int mock_score(std::span<const render::Image> frames);

// Index of the highest score; ties go to the lowest index. Unscored
// entries never win. nullopt when nothing is scored.
std::optional<std::size_t> select_best(std::span<const std::optional<int>> scores);
std::size_t select_best(std::span<const int> scores);

// best[k] = max(scores[0..k]).
std::vector<int> prefix_best(std::span<const int> scores);

}  // namespace pvfx::llm
