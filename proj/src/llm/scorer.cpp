#include "promptvfx/llm/scorer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include "promptvfx/error.hpp"

namespace pvfx::llm {

std::optional<ParsedScore> parse_score(std::string_view text) {
  for (std::size_t k = 0; k < text.size(); ++k) {
    if (!std::isdigit(static_cast<unsigned char>(text[k]))) continue;
    std::size_t start = k;
    if (start > 0 && text[start - 1] == '-') --start;
    std::string number(text.substr(start, 32));
    char* end = nullptr;
    double raw = std::strtod(number.c_str(), &end);
    if (end == number.c_str() || !std::isfinite(raw)) return std::nullopt;
    double rounded = std::round(raw);
    ParsedScore s;
    s.raw = raw;
    s.clamped = rounded < 0.0 || rounded > 100.0;
    s.value = static_cast<int>(std::clamp(rounded, 0.0, 100.0));
    return s;
  }
  return std::nullopt;
}

int mock_score(std::span<const render::Image> frames) {
  if (frames.size() < 2) return 0;
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t f = 1; f < frames.size(); ++f) {
    const auto& a = frames[f - 1];
    const auto& b = frames[f];
    if (a.width != b.width || a.height != b.height)
      throw ArgumentError("mock scorer frames differ in size");
    double sum = 0.0;
    for (std::size_t p = 0; p < a.rgba.size(); p += 4)
      for (int c = 0; c < 3; ++c)
        sum += std::abs(static_cast<int>(a.rgba[p + c]) - static_cast<int>(b.rgba[p + c]));
    std::size_t channels = a.rgba.size() / 4 * 3;
    total += channels ? sum / static_cast<double>(channels) : 0.0;
    ++pairs;
  }
  double mean = total / static_cast<double>(pairs);
  return static_cast<int>(std::min(100.0, std::round(1000.0 * mean / 255.0)));
}

std::optional<std::size_t> select_best(std::span<const std::optional<int>> scores) {
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < scores.size(); ++k)
    if (scores[k] && (!best || *scores[k] > *scores[*best])) best = k;
  return best;
}

std::size_t select_best(std::span<const int> scores) {
  if (scores.empty()) throw ArgumentError("select_best needs at least one score");
  return static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

std::vector<int> prefix_best(std::span<const int> scores) {
  std::vector<int> out;
  out.reserve(scores.size());
  for (int s : scores) out.push_back(out.empty() ? s : std::max(out.back(), s));
  return out;
}

}  // namespace pvfx::llm
