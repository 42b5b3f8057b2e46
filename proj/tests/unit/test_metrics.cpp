#include <gtest/gtest.h>

#include <cmath>
#include <json.hpp>

#include "oracles.hpp"
#include "promptvfx/error.hpp"
#include "promptvfx/metrics.hpp"
#include "promptvfx/render/png.hpp"

using namespace pvfx;
using namespace pvfx::metrics;
using nlohmann::json;

namespace {

std::vector<std::shared_ptr<const llm::EncodedImage>> bundle_frames(const std::string& bundle) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(testkit::fixtures_dir() / bundle / "frames"))
    files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<std::shared_ptr<const llm::EncodedImage>> out;
  for (const auto& f : files) {
    std::string s = testkit::slurp(f);
    out.push_back(llm::EncodedImage::from_png({s.begin(), s.end()}));
  }
  return out;
}

std::shared_ptr<llm::Transport> replay(const std::string& bundle) {
  return std::make_shared<llm::ReplayTransport>(llm::FixtureStore::load(testkit::fixtures_dir() / bundle));
}

}  // namespace

TEST(Vqa, QuestionWording) {
  EXPECT_EQ(vqa_question("a cat jumps"),
            "Does this video align with the described animation: \"a cat jumps\"?");
}

TEST(Vqa, YesProbabilityArithmetic) {
  std::vector<llm::TokenLogprob> lp{{"Yes", std::log(0.8)}, {"No", std::log(0.2)}};
  EXPECT_NEAR(*yes_probability(lp), 0.8, 1e-12);
  std::vector<llm::TokenLogprob> variants{{"Yes", std::log(0.3)}, {" yes", std::log(0.1)}, {"No.", std::log(0.4)}};
  EXPECT_NEAR(*yes_probability(variants), 0.5, 1e-12);
  std::vector<llm::TokenLogprob> only_yes{{"YES", -0.3}, {"Maybe", -1}};
  EXPECT_EQ(*yes_probability(only_yes), 1.0);
  std::vector<llm::TokenLogprob> only_no{{"no", -0.3}};
  EXPECT_EQ(*yes_probability(only_no), 0.0);
  std::vector<llm::TokenLogprob> neither{{"Y", -0.3}, {"N", -1.0}};
  EXPECT_FALSE(yes_probability(neither));
  std::vector<llm::TokenLogprob> tiny{{"Yes", -800}, {"No", -801}};
  EXPECT_NEAR(*yes_probability(tiny), 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(Vqa, ReplayedLogprobCases) {
  auto frames = bundle_frames("vqa_logprobs");
  auto transport = replay("vqa_logprobs");
  json cases = json::parse(testkit::slurp(testkit::fixtures_dir() / "vqa_logprobs/cases.json"));
  for (const auto& c : cases) {
    auto r = vqascore(frames, c["prompt"].get<std::string>(), *transport);
    EXPECT_EQ(r.method, c["method"]) << c["prompt"];
    EXPECT_GE(r.probability, 0.0);
    EXPECT_LE(r.probability, 1.0);
  }
  auto rises = vqascore(frames, "the vase rises", *transport);
  EXPECT_NEAR(rises.probability, 0.8, 1e-6);
  auto bounces = vqascore(frames, "the vase bounces", *transport);
  EXPECT_EQ(bounces.method, "vqascore_estimate");
  EXPECT_NEAR(bounces.probability, 0.35, 1e-12);
}

TEST(Vqa, AlwaysYesIsOne) {
  auto frames = bundle_frames("always_yes");
  json b = json::parse(testkit::slurp(testkit::fixtures_dir() / "always_yes/bundle.json"));
  auto r = vqascore(frames, b["prompt"].get<std::string>(), *replay("always_yes"));
  EXPECT_EQ(r.probability, 1.0);
  EXPECT_EQ(r.method, "vqascore");
}

TEST(Vqa, SingleFrameRejected) {
  auto frames = bundle_frames("always_yes");
  frames.resize(1);
  auto transport = replay("always_yes");
  EXPECT_THROW(vqascore(frames, "x", *transport), ArgumentError);
}

TEST(Vqa, UnreadableEstimateIsMetricError) {
  llm::ScriptedTransport t([](const llm::ChatRequest&) { return llm::ChatResponse{"hard to say", {}}; });
  auto frames = bundle_frames("always_yes");
  EXPECT_THROW(vqascore(frames, "x", t), MetricError);
}

TEST(Vqa, RequestAsksForLogprobs) {
  llm::ChatRequest seen;
  llm::ScriptedTransport t([&](const llm::ChatRequest& r) {
    seen = r;
    return llm::ChatResponse{"No", {{"No", -0.1}, {"Yes", -2.0}}};
  });
  auto frames = bundle_frames("always_yes");
  auto r = vqascore(frames, "x", t);
  EXPECT_TRUE(seen.logprobs);
  EXPECT_EQ(seen.top_logprobs, 5);
  EXPECT_EQ(seen.messages.front().images.size(), frames.size());
  EXPECT_NEAR(r.probability, 1.0 / (1.0 + std::exp(1.9)), 1e-12);
}

TEST(Vqa, MockAlignmentInRange) {
  render::Image a;
  a.width = a.height = 2;
  a.rgba.assign(16, 10);
  render::Image b = a;
  b.rgba[0] = 20;
  std::vector<render::Image> frames{a, b};
  auto r = mock_alignment(frames);
  EXPECT_EQ(r.method, "mock");
  EXPECT_GT(r.probability, 0.0);
  EXPECT_LE(r.probability, 1.0);
}
