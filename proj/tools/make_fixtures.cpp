// Regenerates the replay bundles under tests/fixtures from the scripted
// model in fixture_scripts.cpp. Usage: make_fixtures <fixtures-root>
#include <cmath>
#include <fstream>
#include <iostream>

#include "fixture_scripts.hpp"
#include "promptvfx/llm/pipeline.hpp"
#include "promptvfx/metrics.hpp"
#include "promptvfx/render/png.hpp"
#include "promptvfx/synthetic.hpp"

namespace fs = std::filesystem;
using namespace pvfx;
using llm::json;

namespace {

std::shared_ptr<llm::RecordingTransport> recorder(const fs::path& dir,
                                                  llm::ScriptedTransport::Script script) {
  fs::remove(dir / llm::FixtureStore::kFileName);
  return std::make_shared<llm::RecordingTransport>(
      std::make_shared<llm::ScriptedTransport>(std::move(script)), llm::FixtureStore(dir), true);
}

llm::PipelineConfig bundle_config(int m, int auto_rounds) {
  llm::PipelineConfig c;
  c.m = m;
  c.auto_rounds = auto_rounds;
  c.zero_timestamps = true;
  c.render_final = false;
  return c;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

void require_done(const llm::AnimationJob& job, const char* what) {
  if (job.status != llm::JobStatus::done)
    throw std::runtime_error(std::string(what) + " failed: " +
                             (job.diagnostics.empty() ? "" : job.diagnostics.back()));
}

void vase_bundle(const fs::path& dir) {
  fs::create_directories(dir);
  auto synth = make_vase_scene(1000);
  save_scene(synth.scene, dir / "scene.ply");
  {
    std::ofstream m(dir / "mask.txt");
    m << format_mask(synth.mask);
  }
  auto scene = std::make_shared<Scene>(load_scene(dir / "scene.ply"));
  SelectionMask mask = load_mask(dir / "mask.txt", *scene);

  auto rec = recorder(dir, [](const llm::ChatRequest& r) { return fixtures::vase_reply(r); });
  llm::AnimationJob job;
  job.id = 1;
  job.prompt = fixtures::kVasePrompt;
  llm::Pipeline full(rec, bundle_config(4, 1));
  job = full.run_job(scene, mask, job);
  require_done(job, "vase_raise m=4");
  auto revision = full.revise(job, scene, mask, fixtures::kVaseFeedback, 2);
  require_done(revision, "vase_raise feedback");

  llm::AnimationJob small;
  small.id = 1;
  small.prompt = fixtures::kVasePrompt;
  small = llm::Pipeline(rec, bundle_config(3, 0)).run_job(scene, mask, small);
  require_done(small, "vase_raise m=3");

  write_json(dir / "bundle.json", {{"prompt", fixtures::kVasePrompt},
                                   {"feedback", fixtures::kVaseFeedback},
                                   {"scene_splats", 1000},
                                   {"runs", json::array({{{"m", 4}, {"auto_rounds", 1}},
                                                         {{"m", 3}, {"auto_rounds", 0}}})}});
  std::cout << dir.string() << ": " << rec->snapshot().size() << " exchanges\n";
}

void vase_100k_bundle(const fs::path& dir) {
  fs::create_directories(dir);
  auto synth = make_vase_scene(100000);
  auto scene = std::make_shared<Scene>(std::move(synth.scene));
  auto rec = recorder(dir, [](const llm::ChatRequest& r) { return fixtures::vase_reply(r); });
  llm::AnimationJob job;
  job.id = 1;
  job.prompt = fixtures::kVasePrompt;
  job = llm::Pipeline(rec, bundle_config(4, 1)).run_job(scene, synth.mask, job);
  require_done(job, "vase_raise_100k");
  write_json(dir / "bundle.json", {{"prompt", fixtures::kVasePrompt},
                                   {"scene_splats", 100000},
                                   {"runs", json::array({{{"m", 4}, {"auto_rounds", 1}}})}});
  std::cout << dir.string() << ": " << rec->snapshot().size() << " exchanges\n";
}

std::vector<render::Image> vase_frames() {
  auto synth = make_vase_scene(1000);
  auto scene = std::make_shared<Scene>(std::move(synth.scene));
  auto program = field::FieldProgram::compile(fixtures::vase_candidate(1), 3.0, 0);
  auto cam = render::orbit_cameras(bounds(*scene, SelectionMask::all(scene->size())), 1).front();
  std::vector<render::Image> frames;
  for (double t : {0.0, 1.5, 2.5})
    frames.push_back(render::rasterize(apply_field(scene, synth.mask, program, t), cam, 64, 64,
                                       {1.0, 1.0, 1.0}));
  return frames;
}

void always_yes_bundle(const fs::path& dir, const std::vector<render::Image>& frames) {
  fs::create_directories(dir);
  render::encode_sequence(frames, dir / "frames");
  auto rec = recorder(dir, [](const llm::ChatRequest&) {
    return llm::ChatResponse{"Yes", {{"Yes", 0.0}}};
  });
  auto score = metrics::vqascore(frames, fixtures::kVasePrompt, *rec);
  write_json(dir / "bundle.json", {{"prompt", fixtures::kVasePrompt}, {"expected", score.probability}});
  std::cout << dir.string() << ": probability " << score.probability << "\n";
}

// Log-probability cases for the VQAScore arithmetic. The expected values
// are not stored; tests recompute them from the logprobs.
void vqa_bundle(const fs::path& dir, const std::vector<render::Image>& frames) {
  fs::create_directories(dir);
  render::encode_sequence(frames, dir / "frames");
  struct Case {
    std::string prompt;
    std::vector<llm::TokenLogprob> logprobs;
    std::string estimate;
  };
  std::vector<Case> cases{
      {"the vase rises", {{"Yes", std::log(0.8)}, {"No", std::log(0.2)}}, ""},
      {"the vase spins", {{"Yes", -0.5}, {"No", -1.7}, {"Maybe", -3.0}}, ""},
      {"the vase melts", {{"No", -0.05}, {"Yes", -3.2}}, ""},
      {"the vase glows", {{"Yes", -0.9}, {" yes", -2.3}, {"No", -1.1}, {"no", -4.0}}, ""},
      {"the vase shatters", {{"Yes", -0.01}, {"Sure", -4.6}}, ""},
      {"the vase floats", {{"Y", -0.2}, {"N", -1.8}}, "0.6"},
      {"the vase fades", {{"No", -0.3}}, ""},
      {"the vase bounces", {}, "0.35"},
  };
  auto rec = recorder(dir, [&](const llm::ChatRequest& r) {
    const std::string& text = r.messages.front().text;
    for (const auto& c : cases)
      if (text.find("\"" + c.prompt + "\"") != std::string::npos) {
        if (r.meta.value("stage", "") == "vqascore_estimate") return llm::ChatResponse{c.estimate, {}};
        std::string answer = c.logprobs.empty() ? "" : c.logprobs.front().token;
        return llm::ChatResponse{answer, c.logprobs};
      }
    throw std::runtime_error("unknown vqa prompt");
  });
  json out = json::array();
  for (const auto& c : cases) {
    json lp = json::array();
    for (const auto& t : c.logprobs) lp.push_back({{"token", t.token}, {"logprob", t.logprob}});
    auto score = metrics::vqascore(frames, c.prompt, *rec);
    out.push_back({{"prompt", c.prompt}, {"logprobs", lp}, {"estimate", c.estimate},
                   {"method", score.method}});
  }
  write_json(dir / "cases.json", out);
  std::cout << dir.string() << ": " << cases.size() << " cases\n";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2 || argv[1][0] == '-') {
    std::cerr << "usage: make_fixtures <fixtures-root>\n";
    return 2;
  }
  fs::path root = argv[1];
  try {
    vase_bundle(root / "vase_raise");
    vase_100k_bundle(root / "vase_raise_100k");
    auto frames = vase_frames();
    always_yes_bundle(root / "always_yes", frames);
    vqa_bundle(root / "vqa_logprobs", frames);
  } catch (const std::exception& e) {
    std::cerr << "make_fixtures: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
