#include "promptvfx/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include "promptvfx/error.hpp"
#include "promptvfx/llm/scorer.hpp"
#include "promptvfx/render/png.hpp"

namespace pvfx::metrics {

namespace {

std::string normalize_token(std::string_view token) {
  std::string out;
  for (char c : token)
    if (!std::isspace(static_cast<unsigned char>(c)))
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  while (!out.empty() && std::ispunct(static_cast<unsigned char>(out.back()))) out.pop_back();
  return out;
}

double log_add(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

std::optional<double> parse_probability(std::string_view text) {
  for (std::size_t k = 0; k < text.size(); ++k) {
    if (!std::isdigit(static_cast<unsigned char>(text[k])) && text[k] != '.') continue;
    std::string s(text.substr(k, 32));
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) continue;
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) return std::nullopt;
    return v;
  }
  return std::nullopt;
}

}  // namespace

std::string vqa_question(std::string_view prompt) {
  return "Does this video align with the described animation: \"" + std::string(prompt) + "\"?";
}

std::optional<double> yes_probability(std::span<const llm::TokenLogprob> top_logprobs) {
  double log_yes = -INFINITY, log_no = -INFINITY;
  for (const auto& t : top_logprobs) {
    if (!std::isfinite(t.logprob) && t.logprob != -INFINITY) continue;
    std::string tok = normalize_token(t.token);
    if (tok == "yes") log_yes = log_add(log_yes, t.logprob);
    else if (tok == "no") log_no = log_add(log_no, t.logprob);
  }
  if (log_yes == -INFINITY) {
    if (log_no == -INFINITY) return std::nullopt;
    return 0.0;
  }
  if (log_no == -INFINITY) return 1.0;
  return 1.0 / (1.0 + std::exp(log_no - log_yes));
}

AlignmentScore vqascore(std::span<const std::shared_ptr<const llm::EncodedImage>> frames,
                        std::string_view prompt, llm::Transport& transport,
                        const VqaOptions& options) {
  if (frames.size() < 2) throw ArgumentError("vqascore needs at least two frames");
  llm::ChatRequest req;
  req.model = options.model;
  req.temperature = 0.0;
  llm::ChatMessage user{"user",
                        "The images are consecutive frames of one video.\n" + vqa_question(prompt) +
                            "\nAnswer Yes or No.",
                        {frames.begin(), frames.end()}};
  req.messages.push_back(user);
  req.logprobs = transport.supports_logprobs();
  req.top_logprobs = req.logprobs ? options.top_logprobs : 0;
  req.meta = {{"stage", "vqascore"}};
  llm::ChatResponse reply = transport.complete(req);
  if (auto p = yes_probability(reply.top_logprobs))
    return {*p, "vqascore", reply.text};

  // No usable log-probabilities: ask for a calibrated estimate instead.
  llm::ChatRequest est;
  est.model = options.model;
  est.temperature = 0.0;
  est.messages.push_back({"user",
                          "The images are consecutive frames of one video.\n" +
                              vqa_question(prompt) +
                              "\nEstimate the probability that the answer is Yes. Reply with a "
                              "single number between 0 and 1 and nothing else.",
                          {frames.begin(), frames.end()}});
  est.meta = {{"stage", "vqascore_estimate"}};
  llm::ChatResponse estimate = transport.complete(est);
  auto p = parse_probability(estimate.text);
  if (!p) throw MetricError("cannot read a probability from reply: " + estimate.text.substr(0, 200));
  return {*p, "vqascore_estimate", estimate.text};
}

AlignmentScore vqascore(std::span<const render::Image> frames, std::string_view prompt,
                        llm::Transport& transport, const VqaOptions& options) {
  std::vector<std::shared_ptr<const llm::EncodedImage>> encoded;
  for (const auto& f : frames) encoded.push_back(llm::EncodedImage::from_png(render::encode_png(f)));
  return vqascore(encoded, prompt, transport, options);
}

AlignmentScore mock_alignment(std::span<const render::Image> frames) {
  if (frames.size() < 2) throw ArgumentError("mock alignment needs at least two frames");
  return {llm::mock_score(frames) / 100.0, "mock", ""};
}

}  // namespace pvfx::metrics
