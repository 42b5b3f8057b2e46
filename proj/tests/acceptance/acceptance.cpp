// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cli.hpp"
#include "oracles.hpp"
#include "promptvfx/animation.hpp"
#include "promptvfx/llm/pipeline.hpp"
#include "promptvfx/llm/scorer.hpp"
#include "promptvfx/log.hpp"
#include "promptvfx/metrics.hpp"
#include "promptvfx/render/png.hpp"
#include "promptvfx/render/raster.hpp"
#include "promptvfx/synthetic.hpp"

using namespace pvfx;
using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

const char* kPrompt = "move the vase up for two seconds, then dissolve it over one second";

std::shared_ptr<llm::Transport> replay(const std::string& bundle) {
  return std::make_shared<llm::ReplayTransport>(
      llm::FixtureStore::load(testkit::fixtures_dir() / bundle));
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "promptvfx");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  return cli::run(static_cast<int>(args.size()), argv.data());
}

// ---------------------------------------------------------------------------

Outcome worked_example() {
  auto start = Clock::now();
  auto dir = testkit::fixtures_dir() / "vase_raise";
  auto scene = std::make_shared<Scene>(load_scene(dir / "scene.ply"));
  SelectionMask mask = load_mask(dir / "mask.txt", *scene);
  llm::PipelineConfig cfg;
  cfg.zero_timestamps = true;
  llm::Pipeline pipeline(replay("vase_raise"), cfg);
  llm::AnimationJob job;
  job.id = 1;
  job.prompt = kPrompt;
  std::size_t frames = 0;
  llm::JobHooks hooks;
  hooks.on_frame = [&](std::size_t, const render::Image&) { ++frames; };
  job = pipeline.run_job(scene, mask, job, hooks);
  if (job.status != llm::JobStatus::done)
    return {false, "job failed: " + (job.diagnostics.empty() ? "" : job.diagnostics.back())};

  auto program = job.program();
  Animator anim(scene, mask);
  auto at1 = anim.apply(program, 1.0), at2 = anim.apply(program, 2.0), at25 = anim.apply(program, 2.5);
  double err1 = 0, err2 = 0, err_alpha = 0, dz1 = 0, dz2 = 0, a25 = 0;
  for (std::size_t k = 0; k < mask.size(); ++k) {
    const auto& base = scene->splats[mask.indices()[k]];
    dz1 = at1.states[k].position.z - base.position.z;
    dz2 = at2.states[k].position.z - base.position.z;
    a25 = at25.states[k].alpha;
    err1 = std::max(err1, std::abs(dz1 - 1.0));
    err2 = std::max(err2, std::abs(dz2 - 2.0));
    err_alpha = std::max(err_alpha, std::abs(a25 - 0.5));
  }
  double elapsed = seconds_since(start);
  bool ok = err1 <= 1e-6 && err2 <= 1e-6 && err_alpha <= 1e-6 && elapsed < 10.0 && frames == 91;
  return {ok, "dz(1)=" + fmt("%.6f", dz1) + " dz(2)=" + fmt("%.6f", dz2) + " alpha(2.5)=" +
                  fmt("%.6f", a25) + " max errors " + fmt("%.1e", err1) + "/" + fmt("%.1e", err2) +
                  "/" + fmt("%.1e", err_alpha) + ", " + std::to_string(frames) + " frames, " +
                  fmt("%.2f s", elapsed) + " (limit 10 s)"};
}

Outcome hypothesis_monotonicity() {
  std::mt19937_64 rng(2024);
  int violations = 0, checked = 0;
  for (int pool = 0; pool < 50; ++pool) {
    int size = std::uniform_int_distribution<int>(1, 32)(rng);
    std::vector<int> scores(static_cast<std::size_t>(size));
    for (auto& s : scores) s = std::uniform_int_distribution<int>(0, 100)(rng);
    int previous = -1, running = -1;
    auto prefix = llm::prefix_best(scores);
    for (int m = 1; m <= size; ++m) {
      std::span<const int> first(scores.data(), static_cast<std::size_t>(m));
      int best = scores[llm::select_best(first)];
      running = std::max(running, scores[static_cast<std::size_t>(m - 1)]);
      ++checked;
      if (best < previous || best != running || prefix[static_cast<std::size_t>(m - 1)] != best) ++violations;
      previous = best;
    }
  }
  return {violations == 0, std::to_string(checked) + " prefixes over 50 pools, " +
                               std::to_string(violations) + " violations"};
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = testkit::slurp(e.path());
  return out;
}

Outcome determinism() {
  testkit::TempDir a("acc_det_a"), b("acc_det_b");
  auto bundle = (testkit::fixtures_dir() / "vase_raise").string();
  for (const auto* dir : {&a, &b}) {
    int rc = run_cli({"animate", "--transport", "replay", "--fixtures", bundle, "--scene",
                      bundle + "/scene.ply", "--mask", bundle + "/mask.txt", "--prompt", kPrompt,
                      "--out", dir->path().string()});
    if (rc != 0) return {false, "animate exited with " + std::to_string(rc)};
  }
  auto ta = read_tree(a.path()), tb = read_tree(b.path());
  std::size_t frames = 0;
  for (const auto& [k, v] : ta) frames += k.rfind("frames/", 0) == 0;
  std::string mismatch;
  if (ta.size() != tb.size()) mismatch = "file sets differ";
  for (const auto& [k, v] : ta)
    if (mismatch.empty() && (!tb.count(k) || tb.at(k) != v)) mismatch = k;
  auto job = json::parse(ta["job.json"]);
  bool selected = job["selected_index"] == 1 && job["scores"] == json::array({62, 87, 55, 71});
  bool ok = mismatch.empty() && frames == 91 && selected;
  return {ok, std::to_string(ta.size()) + " files (" + std::to_string(frames) +
                  " frames) compared byte for byte" + (mismatch.empty() ? "" : ", mismatch: " + mismatch) +
                  (selected ? "" : ", unexpected selection")};
}

Outcome latency() {
  testkit::TempDir out("acc_latency");
  auto start = Clock::now();
  auto synth = make_vase_scene(100000);
  auto scene = std::make_shared<Scene>(std::move(synth.scene));
  llm::PipelineConfig cfg;
  cfg.zero_timestamps = true;
  llm::Pipeline pipeline(replay("vase_raise_100k"), cfg);
  llm::AnimationJob job;
  job.id = 1;
  job.prompt = kPrompt;
  std::size_t frames = 0;
  llm::JobHooks hooks;
  hooks.on_frame = [&](std::size_t k, const render::Image& img) {
    render::write_png(img, out / render::frame_name(k));
    frames += img.width == 512 && img.height == 512;
  };
  job = pipeline.run_job(scene, synth.mask, job, hooks);
  double job_seconds = seconds_since(start);
  if (job.status != llm::JobStatus::done)
    return {false, "job failed: " + (job.diagnostics.empty() ? "" : job.diagnostics.back())};

  auto all = SelectionMask::all(scene->size());
  Animator anim(scene, all);
  auto program = job.program();
  Timeline timeline(program.duration(), 30.0);
  auto eval_start = Clock::now();
  for (double t : timeline.times()) anim.apply(program, t);
  double per_frame_ms = 1000.0 * seconds_since(eval_start) / static_cast<double>(timeline.size());

  bool ok = frames == 91 && job_seconds < 60.0 && per_frame_ms <= 33.0;
  return {ok, std::to_string(frames) + " frames at 512x512 in " + fmt("%.2f s", job_seconds) +
                  " (limit 60 s); field eval " + fmt("%.2f", per_frame_ms) +
                  " ms/frame for 100k splats (limit 33); " +
                  std::to_string(std::thread::hardware_concurrency()) + " hardware threads"};
}

Outcome renderer_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t count = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
    auto scene = std::make_shared<Scene>(make_random_scene(count, 1000 + trial, false, 0.8));
    std::vector<std::uint32_t> picked;
    for (std::uint32_t i = 0; i < count; ++i)
      if (u(rng) < 0.5) picked.push_back(i);
    SceneState state;
    state.base = scene;
    state.mask = SelectionMask(picked, count);
    for (auto i : state.mask.indices()) {
      const auto& s = scene->splats[i];
      field::AttributeState a;
      a.position = s.position + Vec3{0.3 * (u(rng) - 0.5), 0.3 * (u(rng) - 0.5), 0.3 * (u(rng) - 0.5)};
      a.rgb = {u(rng), u(rng), u(rng)};
      a.alpha = u(rng);
      state.states.push_back(a);
    }
    render::Camera cam;
    double az = 2.0 * 3.14159265358979323846 * u(rng), el = -1.0 + 2.0 * u(rng), r = 2.0 + 3.0 * u(rng);
    cam.target = {0.2 * (u(rng) - 0.5), 0.2 * (u(rng) - 0.5), 0.2 * (u(rng) - 0.5)};
    cam.eye = cam.target + r * Vec3{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
    cam.vertical_fov = 30.0 + 60.0 * u(rng);
    int w = std::uniform_int_distribution<int>(8, 64)(rng), h = std::uniform_int_distribution<int>(8, 64)(rng);
    Vec3 bg{u(rng), u(rng), u(rng)};
    auto img = render::rasterize_float(state, cam, w, h, bg);
    auto ref = testkit::oracle_render(state, cam, w, h, bg);
    for (std::size_t k = 0; k < ref.size(); ++k) worst = std::max(worst, std::abs(img.rgb[k] - ref[k]));
  }
  return {worst <= 1e-5, "200 scenes, max channel error " + fmt("%.2e", worst) + " (limit 1e-5)"};
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }
bool same_state(const field::AttributeState& a, const field::AttributeState& b) {
  return same_bits(a.position.x, b.position.x) && same_bits(a.position.y, b.position.y) &&
         same_bits(a.position.z, b.position.z) && same_bits(a.rgb.x, b.rgb.x) &&
         same_bits(a.rgb.y, b.rgb.y) && same_bits(a.rgb.z, b.rgb.z) && same_bits(a.alpha, b.alpha);
}
bool in_range(const field::AttributeState& s) {
  auto unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  return all_finite(s.position) && unit(s.rgb.x) && unit(s.rgb.y) && unit(s.rgb.z) && unit(s.alpha);
}

Outcome dsl_invariants() {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t identity_failures = 0, compile_failures = 0, purity_failures = 0, range_failures = 0,
              batch_failures = 0, evaluations = 0;

  for (int s = 0; s < 20; ++s) {
    Scene scene = make_random_scene(64, 500 + s, false, 3.0);
    auto mask = SelectionMask::all(scene.size());
    double T = 0.5 + 10.0 * u(rng);
    auto id = field::FieldProgram::identity(T, s);
    field::BatchEvaluator ev(scene, mask);
    std::vector<field::AttributeState> out(ev.size());
    for (int k = 0; k < 50; ++k) {
      double t = k == 0 ? 0.0 : (k == 1 ? T : T * u(rng));
      ev.evaluate(id, t, out);
      for (std::size_t j = 0; j < out.size(); ++j) {
        const auto& g = scene.splats[j];
        if (!(out[j].position == g.position) || !(out[j].rgb == dc_to_rgb(g.sh_dc)) ||
            out[j].alpha != g.opacity)
          ++identity_failures;
      }
    }
  }

  testkit::ProgramGenerator gen(99);
  Scene scene = make_random_scene(12, 8, false, 2.0);
  auto mask = SelectionMask::all(scene.size());
  field::BatchEvaluator ev(scene, mask);
  std::vector<field::AttributeState> first(ev.size()), second(ev.size());
  for (int p = 0; p < 10000; ++p) {
    field::FieldSources src{gen.program(true), gen.program(true), gen.program(false)};
    double T = 0.5 + 5.0 * u(rng);
    std::optional<field::FieldProgram> prog;
    try {
      prog = field::FieldProgram::compile(src, T, static_cast<std::uint64_t>(p));
    } catch (const Error& e) {
      if (++compile_failures <= 3) std::cerr << "  generated program rejected: " << e.what() << "\n";
      continue;
    }
    for (double t : {0.0, T * u(rng), T}) {
      ev.evaluate(*prog, t, first);
      ev.evaluate(*prog, t, second);
      for (std::size_t j = 0; j < first.size(); ++j) {
        ++evaluations;
        if (!same_state(first[j], second[j])) ++purity_failures;
        if (!in_range(first[j])) ++range_failures;
        if (!same_state(first[j], field::eval_attribute(*prog, ev.env(j, t, *prog)))) ++batch_failures;
      }
    }
  }
  std::size_t total = identity_failures + compile_failures + purity_failures + range_failures + batch_failures;
  std::ostringstream d;
  d << "10000 random programs, " << evaluations << " lane evaluations; failures: identity "
    << identity_failures << ", generator/compile " << compile_failures << ", purity " << purity_failures
    << ", range " << range_failures << ", batch vs pointwise " << batch_failures;
  return {total == 0, d.str()};
}

Outcome phase_validation() {
  std::mt19937_64 rng(31337);
  int false_accepts = 0, false_rejects = 0, label_mismatch = 0, mutated = 0;
  for (int k = 0; k < 1000; ++k) {
    auto lp = testkit::random_plan(rng, k % 2 == 1);
    mutated += !lp.tiles;
    bool accepted = true;
    try {
      validate_phases(lp.plan);
    } catch (const Error&) {
      accepted = false;
    }
    if (accepted && !lp.tiles) ++false_accepts;
    if (!accepted && lp.tiles) ++false_rejects;
    if (testkit::oracle_tiles(lp.plan) != lp.tiles) ++label_mismatch;
  }
  return {false_accepts == 0 && false_rejects == 0 && label_mismatch == 0,
          "1000 plans (" + std::to_string(mutated) + " mutated): false accepts " +
              std::to_string(false_accepts) + ", false rejects " + std::to_string(false_rejects)};
}

Outcome round_trip() {
  std::mt19937_64 rng(8);
  testkit::TempDir dir("acc_roundtrip");
  double worst = 0.0;
  bool sizes_ok = true;
  for (int k = 0; k < 100; ++k) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(1, 400)(rng);
    Scene scene = make_random_scene(n, 7000 + k, k % 2 == 0, 1.0 + k * 0.05);
    save_scene(scene, dir / "scene.ply");
    Scene back = load_scene(dir / "scene.ply");
    if (back.size() != scene.size() || back.sh_rest.size() != scene.sh_rest.size()) {
      sizes_ok = false;
      continue;
    }
    auto diff3 = [&](Vec3 a, Vec3 b) {
      worst = std::max({worst, std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)});
    };
    for (std::size_t i = 0; i < n; ++i) {
      const auto &a = scene.splats[i], &b = back.splats[i];
      diff3(a.position, b.position);
      diff3(a.scale, b.scale);
      diff3(a.sh_dc, b.sh_dc);
      worst = std::max({worst, std::abs(a.opacity - b.opacity), std::abs(a.rotation.w - b.rotation.w),
                        std::abs(a.rotation.x - b.rotation.x), std::abs(a.rotation.y - b.rotation.y),
                        std::abs(a.rotation.z - b.rotation.z)});
    }
    for (std::size_t i = 0; i < scene.sh_rest.size(); ++i)
      worst = std::max(worst, static_cast<double>(std::abs(scene.sh_rest[i] - back.sh_rest[i])));
  }
  return {sizes_ok && worst < 1e-6, "100 scenes, max fieldwise error " + fmt("%.2e", worst) + " (limit 1e-6)"};
}

// Reference normalization: whitespace removed, lowercased, trailing
// punctuation dropped; probabilities of each answer's variants summed.
double hand_yes_probability(const json& logprobs, const std::string& estimate) {
  double yes = 0.0, no = 0.0;
  for (const auto& e : logprobs) {
    std::string tok;
    for (char c : e["token"].get<std::string>())
      if (!std::isspace(static_cast<unsigned char>(c))) tok += static_cast<char>(std::tolower(c));
    while (!tok.empty() && std::ispunct(static_cast<unsigned char>(tok.back()))) tok.pop_back();
    double p = std::exp(e["logprob"].get<double>());
    if (tok == "yes") yes += p;
    if (tok == "no") no += p;
  }
  if (yes + no > 0.0) return yes / (yes + no);
  return std::stod(estimate);
}

std::vector<std::shared_ptr<const llm::EncodedImage>> frames_of(const std::string& bundle) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(testkit::fixtures_dir() / bundle / "frames"))
    files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<std::shared_ptr<const llm::EncodedImage>> out;
  for (const auto& f : files) {
    std::string s = testkit::slurp(f);
    out.push_back(llm::EncodedImage::from_png({s.begin(), s.end()}));
  }
  return out;
}

Outcome vqa_arithmetic() {
  auto cases = json::parse(testkit::slurp(testkit::fixtures_dir() / "vqa_logprobs/cases.json"));
  auto transport = replay("vqa_logprobs");
  auto frames = frames_of("vqa_logprobs");
  double worst = 0.0;
  for (const auto& c : cases) {
    auto got = metrics::vqascore(frames, c["prompt"].get<std::string>(), *transport);
    double want = hand_yes_probability(c["logprobs"], c["estimate"].get<std::string>());
    worst = std::max(worst, std::abs(got.probability - want));
  }
  auto yes = metrics::vqascore(frames_of("always_yes"), kPrompt, *replay("always_yes"));
  worst = std::max(worst, std::abs(yes.probability - 1.0));
  return {worst <= 1e-6, std::to_string(cases.size()) + " logprob cases plus always-yes, max error " +
                             fmt("%.2e", worst) + " (limit 1e-6)"};
}

}  // namespace

int main() {
  log::set_sink([](const std::string&, const std::string&) {});
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  std::vector<Criterion> criteria{
      {"worked example fidelity", worked_example},
      {"hypothesis monotonicity", hypothesis_monotonicity},
      {"pipeline determinism", determinism},
      {"latency proxy", latency},
      {"renderer oracle equivalence", renderer_oracle},
      {"DSL invariant suite", dsl_invariants},
      {"phase validation", phase_validation},
      {"splat round trip", round_trip},
      {"VQAScore arithmetic", vqa_arithmetic},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << "AC" << (k + 1) << " " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[k].name
              << ": " << o.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
