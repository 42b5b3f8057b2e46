#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "oracles.hpp"
#include "promptvfx/config.hpp"
#include "promptvfx/error.hpp"
#include "promptvfx/llm/job.hpp"
#include "promptvfx/llm/scorer.hpp"
#include "promptvfx/llm/templates.hpp"
#include "promptvfx/llm/transport.hpp"

using namespace pvfx;
using namespace pvfx::llm;

namespace {

ChatRequest sample_request(const std::string& text = "hello") {
  ChatRequest r;
  r.model = "m";
  r.temperature = 0.7;
  r.seed = 99;
  r.messages.push_back({"system", "be brief", {}});
  std::vector<std::uint8_t> png{0x89, 'P', 'N', 'G', 1, 2, 3};
  r.messages.push_back({"user", text, {EncodedImage::from_png(png)}});
  r.meta = {{"stage", "test"}};
  return r;
}

}  // namespace

TEST(Request, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex(std::string_view("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  std::vector<std::uint8_t> man{'M', 'a', 'n'};
  EXPECT_EQ(base64_encode(man), "TWFu");
}

TEST(Request, CanonicalFormReplacesImagesAndHidesNothingElse) {
  ChatRequest r = sample_request();
  json c = r.canonical();
  std::string dump = c.dump();
  EXPECT_EQ(dump.find("data:image"), std::string::npos);
  EXPECT_NE(dump.find(sha256_hex(r.messages[1].images[0]->png)), std::string::npos);
  EXPECT_EQ(r.hash(), sha256_hex(dump));
  EXPECT_EQ(canonical_hash(c), r.hash());
}

TEST(Request, HashSensitiveToEveryField) {
  std::string h = sample_request().hash();
  EXPECT_EQ(sample_request().hash(), h);
  auto r = sample_request();
  r.temperature = 0.8;
  EXPECT_NE(r.hash(), h);
  r = sample_request();
  r.seed.reset();
  EXPECT_NE(r.hash(), h);
  r = sample_request();
  r.meta["attempt"] = 1;
  EXPECT_NE(r.hash(), h);
  EXPECT_NE(sample_request("hello!").hash(), h);
}

TEST(Request, WireFormatInlinesImagesAndDropsMeta) {
  json w = sample_request().wire();
  EXPECT_EQ(w["model"], "m");
  EXPECT_EQ(w["seed"], 99);
  EXPECT_FALSE(w.contains("meta"));
  std::string dump = w.dump();
  EXPECT_NE(dump.find("data:image/png;base64,"), std::string::npos);
  EXPECT_EQ(dump.find("\"stage\""), std::string::npos);
}

TEST(Request, ResponseFromWire) {
  json body = {{"choices",
                {{{"message", {{"role", "assistant"}, {"content", "Yes"}}},
                  {"logprobs",
                   {{"content",
                     {{{"token", "Yes"},
                       {"logprob", -0.1},
                       {"top_logprobs", {{{"token", "Yes"}, {"logprob", -0.1}}, {{"token", "No"}, {"logprob", -2.4}}}}}}}}}}}}};
  auto r = ChatResponse::from_wire(body);
  EXPECT_EQ(r.text, "Yes");
  ASSERT_EQ(r.top_logprobs.size(), 2u);
  EXPECT_EQ(r.top_logprobs[1].token, "No");
  EXPECT_DOUBLE_EQ(r.top_logprobs[1].logprob, -2.4);
  auto back = ChatResponse::from_json(r.to_json());
  EXPECT_EQ(back.text, r.text);
  EXPECT_EQ(back.top_logprobs.size(), 2u);
}

TEST(Transport, RecordThenReplayReturnsSameResponses) {
  testkit::TempDir dir("rec");
  int calls = 0;
  auto inner = std::make_shared<ScriptedTransport>([&](const ChatRequest& r) {
    ++calls;
    return ChatResponse{"echo " + r.messages.back().text, {}};
  });
  RecordingTransport rec(inner, FixtureStore(dir.path()), true);
  EXPECT_EQ(rec.complete(sample_request("a")).text, "echo a");
  EXPECT_EQ(rec.complete(sample_request("b")).text, "echo b");
  EXPECT_EQ(calls, 2);

  auto store = FixtureStore::load(dir.path());
  EXPECT_EQ(store.size(), 2u);
  EXPECT_TRUE(store.verify().empty());
  ReplayTransport replay(store);
  EXPECT_EQ(replay.complete(sample_request("b")).text, "echo b");
  try {
    replay.complete(sample_request("c"));
    FAIL();
  } catch (const ReplayMissError& e) {
    EXPECT_EQ(e.hash(), sample_request("c").hash());
  }
}

TEST(Transport, VerifyFindsTamperedEntries) {
  testkit::TempDir dir("tamper");
  FixtureStore store(dir.path());
  auto r = sample_request();
  store.put(r.hash(), {r.canonical(), {"x", {}}, "0"});
  store.save();
  json j = json::parse(testkit::slurp(dir / FixtureStore::kFileName));
  j[r.hash()]["request"]["temperature"] = 0.1;
  std::ofstream(dir / FixtureStore::kFileName) << j.dump();
  auto bad = FixtureStore::load(dir.path()).verify();
  ASSERT_EQ(bad.size(), 1u);
  EXPECT_EQ(bad[0], r.hash());
  std::ofstream(dir / FixtureStore::kFileName) << "{ not json";
  EXPECT_THROW(FixtureStore::load(dir.path()), FormatError);
}

TEST(Transport, CommittedTranscriptsVerify) {
  for (const char* b : {"vase_raise", "vase_raise_100k", "always_yes", "vqa_logprobs"}) {
    auto store = FixtureStore::load(testkit::fixtures_dir() / b);
    EXPECT_GT(store.size(), 0u) << b;
    EXPECT_TRUE(store.verify().empty()) << b;
  }
}

TEST(Transport, ThrottleCapsConcurrency) {
  std::atomic<int> active{0}, peak{0};
  auto slow = std::make_shared<ScriptedTransport>([&](const ChatRequest&) {
    int now = ++active;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --active;
    return ChatResponse{"ok", {}};
  });
  ThrottledTransport t(slow, 2);
  std::vector<std::thread> threads;
  for (int k = 0; k < 6; ++k) threads.emplace_back([&] { t.complete(sample_request()); });
  for (auto& th : threads) th.join();
  EXPECT_LE(peak.load(), 2);
  EXPECT_LE(t.peak_in_flight(), 2);
  EXPECT_GE(t.peak_in_flight(), 1);
}

TEST(Transport, MakeTransportValidatesConfig) {
  TransportConfig c;
  c.mode = TransportMode::replay;
  EXPECT_THROW(make_transport(c), ArgumentError);
  c.fixtures_dir = "/nonexistent/fixtures";
  EXPECT_THROW(make_transport(c), ArgumentError);
  c.fixtures_dir = testkit::fixtures_dir() / "vase_raise";
  EXPECT_EQ(make_transport(c)->mode(), TransportMode::replay);
  c.mode = TransportMode::record;
  c.api_base.clear();
  EXPECT_THROW(make_transport(c), ArgumentError);
  EXPECT_EQ(parse_transport_mode("live"), TransportMode::live);
  EXPECT_THROW(parse_transport_mode("bogus"), ArgumentError);
}

TEST(Templates, EveryTemplateRendersWithItsSlots) {
  auto store = TemplateStore::embedded();
  EXPECT_FALSE(store.grammar_reference().empty());
  for (int k = 0; k < kTemplateCount; ++k) {
    auto id = static_cast<TemplateId>(k);
    EXPECT_FALSE(store.text(id).empty()) << template_name(id);
    Slots values;
    for (const auto& s : store.slots(id)) values[s] = "<" + s + ">";
    std::string out = store.render(id, values);
    EXPECT_EQ(out.find("{{"), std::string::npos) << template_name(id);
    if (!values.empty()) {
      EXPECT_THROW(store.render(id, {}), ArgumentError) << template_name(id);
    }
  }
}

TEST(Templates, DirectoryOverride) {
  testkit::TempDir dir("tpl");
  std::ofstream(dir / "score_animation.txt") << "Rate {{prompt}} now.";
  auto store = TemplateStore::from_dir(dir.path());
  EXPECT_EQ(store.render(TemplateId::score_animation, {{"prompt", "it"}}), "Rate it now.");
  EXPECT_EQ(store.text(TemplateId::code_centers), TemplateStore::embedded().text(TemplateId::code_centers));
}

TEST(Scorer, ParseScore) {
  EXPECT_EQ(parse_score("87")->value, 87);
  EXPECT_EQ(parse_score("Score: 71")->value, 71);
  EXPECT_EQ(parse_score("I'd give it 55/100.")->value, 55);
  EXPECT_EQ(parse_score("62.5")->value, 63);
  auto high = parse_score("score: 104/100");
  ASSERT_TRUE(high);
  EXPECT_EQ(high->value, 100);
  EXPECT_TRUE(high->clamped);
  auto low = parse_score("-3");
  EXPECT_EQ(low->value, 0);
  EXPECT_TRUE(low->clamped);
  EXPECT_FALSE(parse_score("no idea"));
  EXPECT_FALSE(parse_score(""));
}

TEST(Scorer, SelectBestTiesToLowestIndex) {
  std::vector<int> s{40, 90, 90, 10};
  EXPECT_EQ(select_best(std::span<const int>(s)), 1u);
  std::vector<std::optional<int>> o{std::nullopt, 50, std::nullopt, 50};
  EXPECT_EQ(select_best(std::span<const std::optional<int>>(o)), 1u);
  std::vector<std::optional<int>> none{std::nullopt, std::nullopt};
  EXPECT_FALSE(select_best(std::span<const std::optional<int>>(none)));
  std::vector<int> p{3, 1, 4, 1, 5};
  EXPECT_EQ(prefix_best(p), (std::vector<int>{3, 3, 4, 4, 5}));
}

TEST(Scorer, MockScoreTracksMotion) {
  render::Image a, b;
  a.width = b.width = 2;
  a.height = b.height = 1;
  a.rgba.assign(8, 0);
  b.rgba.assign(8, 0);
  std::vector<render::Image> still{a, a};
  EXPECT_EQ(mock_score(still), 0);
  b.rgba[0] = 255;
  std::vector<render::Image> moving{a, b};
  EXPECT_EQ(mock_score(moving), 100);
}

TEST(Job, StatusTransitions) {
  EXPECT_TRUE(can_transition(JobStatus::queued, JobStatus::designing));
  EXPECT_TRUE(can_transition(JobStatus::queued, JobStatus::refining));
  EXPECT_TRUE(can_transition(JobStatus::scoring, JobStatus::failed));
  EXPECT_FALSE(can_transition(JobStatus::scoring, JobStatus::generating));
  EXPECT_FALSE(can_transition(JobStatus::done, JobStatus::failed));
  EXPECT_FALSE(can_transition(JobStatus::failed, JobStatus::done));
  for (auto s : {JobStatus::queued, JobStatus::designing, JobStatus::generating, JobStatus::scoring,
                 JobStatus::refining, JobStatus::done, JobStatus::failed})
    EXPECT_EQ(parse_job_status(to_string(s)), s);
  AnimationJob j;
  j.advance(JobStatus::designing);
  EXPECT_THROW(j.advance(JobStatus::queued), ArgumentError);
}

TEST(Job, JsonRoundTripOfPlanAndSources) {
  PhasePlan p{{{"Rise", 0, 2, "up"}, {"Fade", 2, 3, "out"}}, 3};
  EXPECT_EQ(phase_plan_from_json(to_json(p)), p);
  field::FieldSources s{"return p0;", "return c0;", "return a0;"};
  EXPECT_EQ(sources_from_json(to_json(s)), s);
  AnimationJob j;
  j.id = 5;
  j.parent = 4;
  j.prompt = "x";
  j.phases = p;
  j.hypotheses.push_back({s, 1, 0.7, 80, {}, {}});
  j.hypotheses.push_back({std::nullopt, 2, 0.8, std::nullopt, {}, {"codegen failed"}});
  json out = j.to_json();
  EXPECT_EQ(out["id"], 5);
  EXPECT_EQ(out["parent"], 4);
  EXPECT_EQ(out["scores"], json::array({80, nullptr}));
  json view = j.status_view();
  EXPECT_FALSE(view.contains("transcript"));
  EXPECT_EQ(view["status"], "queued");
}

TEST(Config, LayeringAndValidation) {
  AppConfig c;
  c.apply_json({{"m", 6}, {"port", 9000}, {"transport", "replay"}, {"fixtures", "/tmp/x"}});
  EXPECT_EQ(c.pipeline.m, 6);
  EXPECT_EQ(c.port, 9000);
  EXPECT_EQ(c.transport.fixtures_dir, "/tmp/x");
  EXPECT_THROW(c.apply_json({{"bogus", 1}}), ArgumentError);
  ::setenv("PVFX_MODEL", "other-model", 1);
  c.apply_environment();
  ::unsetenv("PVFX_MODEL");
  c.finalize();
  EXPECT_EQ(c.transport.model, "other-model");
  EXPECT_EQ(c.pipeline.model, "other-model");
  EXPECT_TRUE(c.transport.zero_timestamps);
  PipelineConfig p;
  p.m = 0;
  EXPECT_THROW(p.validate(), ArgumentError);
  p.m = 4;
  p.fps = -1;
  EXPECT_THROW(p.validate(), ArgumentError);
}
