#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "promptvfx/llm/request.hpp"
#include "promptvfx/llm/transport.hpp"
#include "promptvfx/render/raster.hpp"

namespace pvfx::metrics {

struct AlignmentScore {
  double probability = 0.0;  // in [0, 1]
  std::string method;        // vqascore | vqascore_estimate | mock
  std::string raw_response;
};

std::string vqa_question(std::string_view prompt);

// p(Yes) / (p(Yes) + p(No)) from first-token alternatives. Tokens are
// compared after trimming and lowercasing; variants of the same answer are
// summed. 0 when only "no" appears; nullopt when neither does.
std::optional<double> yes_probability(std::span<const llm::TokenLogprob> top_logprobs);

struct VqaOptions {
  std::string model = "gpt-4o";
  int top_logprobs = 5;
};

// Throws ArgumentError for fewer than two frames and MetricError when the
// reply cannot be turned into a probability.
AlignmentScore vqascore(std::span<const std::shared_ptr<const llm::EncodedImage>> frames,
                        std::string_view prompt, llm::Transport& transport,
                        const VqaOptions& options = {});
AlignmentScore vqascore(std::span<const render::Image> frames, std::string_view prompt,
                        llm::Transport& transport, const VqaOptions& options = {});

// Frame-difference heuristic rescaled to [0, 1]; for offline smoke tests.
AlignmentScore mock_alignment(std::span<const render::Image> frames);

}  // namespace pvfx::metrics
