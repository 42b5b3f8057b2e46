#include "cli.hpp"

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "promptvfx/config.hpp"
#include "promptvfx/error.hpp"
#include "promptvfx/llm/pipeline.hpp"
#include "promptvfx/metrics.hpp"
#include "promptvfx/render/png.hpp"
#include "promptvfx/service.hpp"

namespace pvfx::cli {

namespace {

namespace fs = std::filesystem;
using llm::json;

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

std::atomic<Service*> g_service{nullptr};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

// Flags shared by every command that talks to a model.
struct TransportFlags {
  std::string config_file;
  std::string transport;
  std::string fixtures;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "JSON config file");
    cmd->add_option("--transport", transport, "live | record | replay")
        ->check(CLI::IsMember({"live", "record", "replay"}));
    cmd->add_option("--fixtures", fixtures, "transcript directory (record/replay)");
  }

  AppConfig resolve() const {
    AppConfig cfg;
    if (!config_file.empty()) {
      if (!fs::exists(config_file)) throw UsageError("config file not found: " + config_file);
      cfg.apply_file(config_file);
    }
    cfg.apply_environment();
    if (!transport.empty()) cfg.transport.mode = llm::parse_transport_mode(transport);
    if (!fixtures.empty()) cfg.transport.fixtures_dir = fixtures;
    return cfg;
  }
};

std::shared_ptr<llm::Transport> build_transport(AppConfig& cfg) {
  cfg.finalize();
  try {
    return llm::make_transport(cfg.transport);
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
}

struct SceneInput {
  std::shared_ptr<const Scene> scene;
  SelectionMask mask;
};

SceneInput load_scene_input(const std::string& scene_path, const std::string& mask_path) {
  if (!fs::exists(scene_path)) throw UsageError("scene file not found: " + scene_path);
  if (!mask_path.empty() && !fs::exists(mask_path))
    throw UsageError("mask file not found: " + mask_path);
  auto scene = std::make_shared<Scene>(load_scene(scene_path));
  SelectionMask mask =
      mask_path.empty() ? SelectionMask::all(scene->size()) : load_mask(mask_path, *scene);
  return {std::move(scene), std::move(mask)};
}

void write_program(const fs::path& dir, const field::FieldSources& sources, double duration,
                   std::uint64_t seed) {
  fs::create_directories(dir);
  write_text(dir / "position.fld", sources.position + "\n");
  write_text(dir / "color.fld", sources.color + "\n");
  write_text(dir / "alpha.fld", sources.alpha + "\n");
  write_text(dir / "program.json", json({{"duration", duration}, {"seed", seed}}).dump(2) + "\n");
}

field::FieldProgram read_program(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError("program directory not found: " + dir.string());
  json meta;
  try {
    meta = json::parse(read_text(dir / "program.json"));
  } catch (const json::exception& e) {
    throw FormatError("program.json", e.what());
  }
  auto strip = [](std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
  };
  field::FieldSources sources{strip(read_text(dir / "position.fld")),
                              strip(read_text(dir / "color.fld")),
                              strip(read_text(dir / "alpha.fld"))};
  return field::FieldProgram::compile(sources, meta.at("duration").get<double>(),
                                      meta.value("seed", std::uint64_t{0}));
}

render::Camera read_camera(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw FormatError("camera", e.what());
  }
  auto vec = [&](const char* key, Vec3 fallback) {
    if (!j.contains(key)) return fallback;
    const auto& a = j.at(key);
    return Vec3{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
  };
  render::Camera cam;
  cam.eye = vec("eye", cam.eye);
  cam.target = vec("target", cam.target);
  cam.up = vec("up", cam.up);
  cam.vertical_fov = j.value("fov", cam.vertical_fov);
  cam.near = j.value("near", cam.near);
  cam.validate();
  return cam;
}

// ---- animate ----

struct AnimateArgs {
  TransportFlags transport;
  std::string scene, mask, prompt, out;
  std::optional<int> m, auto_rounds;
  std::optional<double> fps, duration;
  std::optional<std::uint64_t> seed;
  bool mock_scorer = false;
};

int animate(const AnimateArgs& a) {
  AppConfig cfg = a.transport.resolve();
  if (a.m) cfg.pipeline.m = *a.m;
  if (a.fps) cfg.pipeline.fps = *a.fps;
  if (a.auto_rounds) cfg.pipeline.auto_rounds = *a.auto_rounds;
  if (a.seed) cfg.pipeline.seed = *a.seed;
  if (a.duration) cfg.pipeline.duration_hint = *a.duration;
  if (a.mock_scorer) cfg.pipeline.mock_scorer = true;
  SceneInput input = load_scene_input(a.scene, a.mask);
  auto transport = build_transport(cfg);
  try {
    cfg.pipeline.validate();
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }

  fs::path out = a.out;
  fs::create_directories(out / "frames");
  llm::Pipeline pipeline(transport, cfg.pipeline);
  llm::JobHooks hooks;
  hooks.on_frame = [&](std::size_t k, const render::Image& img) {
    render::write_png(img, out / "frames" / render::frame_name(k));
  };
  llm::AnimationJob job;
  job.id = 1;
  job.prompt = a.prompt;
  job = pipeline.run_job(input.scene, input.mask, std::move(job), hooks);
  write_text(out / "job.json", job.to_json().dump(2) + "\n");
  if (job.selected)
    write_program(out / "program", *job.selected, job.phases.total_duration, job.program_seed());
  if (job.status != llm::JobStatus::done) {
    std::cerr << "pipeline failed at stage " << job.failed_stage;
    if (!job.diagnostics.empty()) std::cerr << ": " << job.diagnostics.back();
    std::cerr << "\n";
    return kFailed;
  }
  std::cout << "done: " << job.frame_count << " frames, T=" << job.phases.total_duration
            << " s, selected candidate " << *job.selected_index << "\n";
  return kOk;
}

// ---- render ----

struct RenderArgs {
  std::string scene, mask, program, camera, out;
  double t = 0.0;
  int width = 512, height = 512;
  std::vector<double> background{0.0, 0.0, 0.0};
};

int render_cmd(const RenderArgs& a) {
  SceneInput input = load_scene_input(a.scene, a.mask);
  field::FieldProgram program = read_program(a.program);
  render::Camera cam =
      a.camera.empty()
          ? render::orbit_cameras(bounds(*input.scene, SelectionMask::all(input.scene->size())), 1)
                .front()
          : read_camera(a.camera);
  SceneState state = apply_field(input.scene, input.mask, program, a.t);
  auto image = render::rasterize(state, cam, a.width, a.height,
                                 {a.background[0], a.background[1], a.background[2]});
  render::write_png(image, a.out);
  return kOk;
}

// ---- score ----

struct ScoreArgs {
  TransportFlags transport;
  std::string frames, prompt;
};

int score_cmd(const ScoreArgs& a) {
  if (!fs::is_directory(a.frames)) throw UsageError("frames directory not found: " + a.frames);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.frames))
    if (e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<std::shared_ptr<const llm::EncodedImage>> frames;
  for (const auto& f : files) {
    std::string bytes = read_text(f);
    frames.push_back(llm::EncodedImage::from_png({bytes.begin(), bytes.end()}));
  }
  if (frames.size() < 2) throw UsageError("need at least two frames in " + a.frames);
  AppConfig cfg = a.transport.resolve();
  auto transport = build_transport(cfg);
  metrics::VqaOptions opts;
  opts.model = cfg.transport.model;
  auto result = metrics::vqascore(frames, a.prompt, *transport, opts);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", result.probability);
  std::cout << buf << "\n";
  std::cerr << "method: " << result.method << "\n";
  return kOk;
}

// ---- serve ----

struct ServeArgs {
  TransportFlags transport;
  std::string host;
  int port = -1;
  std::string data_dir, static_dir;
};

extern "C" void handle_signal(int) {
  if (Service* s = g_service.load()) s->stop();
}

int serve_cmd(const ServeArgs& a) {
  AppConfig cfg = a.transport.resolve();
  if (!a.host.empty()) cfg.host = a.host;
  if (a.port >= 0) cfg.port = a.port;
  if (!a.data_dir.empty()) cfg.data_dir = a.data_dir;
  auto transport = build_transport(cfg);
  Service service(cfg, transport);
  if (!a.static_dir.empty()) service.mount_static(a.static_dir);
  int port = service.bind(cfg.host, cfg.port);
  std::cout << "listening on http://" << cfg.host << ":" << port << std::endl;
  g_service.store(&service);
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  service.run();
  g_service.store(nullptr);
  return kOk;
}

// ---- replay-verify ----

int replay_verify(const std::string& dir) {
  if (!fs::exists(fs::path(dir) / llm::FixtureStore::kFileName))
    throw UsageError("no transcript in " + dir);
  auto store = llm::FixtureStore::load(dir);
  auto bad = store.verify();
  for (const auto& h : bad) std::cerr << "hash mismatch: " << h << "\n";
  if (!bad.empty()) return kFailed;
  std::cout << "ok: " << store.size() << " exchanges\n";
  return kOk;
}

}  // namespace

void request_stop() {
  if (Service* s = g_service.load()) s->stop();
}

int run(int argc, char** argv) {
  CLI::App app{"Text-driven animation of Gaussian splat scenes"};
  app.require_subcommand(1);

  AnimateArgs anim;
  auto* animate_cmd = app.add_subcommand("animate", "run the full pipeline on a scene");
  anim.transport.add(animate_cmd);
  animate_cmd->add_option("--scene", anim.scene, "splat PLY file")->required();
  animate_cmd->add_option("--mask", anim.mask, "selection mask (one index per line)");
  animate_cmd->add_option("--prompt", anim.prompt, "animation description")->required();
  animate_cmd->add_option("--m", anim.m, "number of hypotheses");
  animate_cmd->add_option("--fps", anim.fps, "frames per second");
  animate_cmd->add_option("--duration", anim.duration, "duration hint in seconds");
  animate_cmd->add_option("--auto-rounds", anim.auto_rounds, "automatic refinement rounds");
  animate_cmd->add_option("--seed", anim.seed, "job seed");
  animate_cmd->add_flag("--mock-scorer", anim.mock_scorer, "score with the frame-difference heuristic");
  animate_cmd->add_option("--out", anim.out, "output directory")->required();

  RenderArgs rend;
  auto* render_sub = app.add_subcommand("render", "render one frame of a program");
  render_sub->add_option("--scene", rend.scene, "splat PLY file")->required();
  render_sub->add_option("--mask", rend.mask, "selection mask");
  render_sub->add_option("--program", rend.program, "program directory")->required();
  render_sub->add_option("--t", rend.t, "time in seconds")->required();
  render_sub->add_option("--camera", rend.camera, "camera JSON");
  render_sub->add_option("--width", rend.width)->check(CLI::Range(1, 8192));
  render_sub->add_option("--height", rend.height)->check(CLI::Range(1, 8192));
  render_sub->add_option("--background", rend.background)->expected(3);
  render_sub->add_option("--out", rend.out, "output PNG")->required();

  ScoreArgs score;
  auto* score_sub = app.add_subcommand("score", "VQAScore of a frame sequence");
  score.transport.add(score_sub);
  score_sub->add_option("--frames", score.frames, "directory of PNG frames")->required();
  score_sub->add_option("--prompt", score.prompt, "animation description")->required();

  ServeArgs serve;
  auto* serve_sub = app.add_subcommand("serve", "run the HTTP service");
  serve.transport.add(serve_sub);
  serve_sub->add_option("--host", serve.host);
  serve_sub->add_option("--port", serve.port);
  serve_sub->add_option("--data-dir", serve.data_dir);
  serve_sub->add_option("--static", serve.static_dir, "web client build directory");

  std::string verify_dir;
  auto* verify_sub = app.add_subcommand("replay-verify", "check transcript hashes");
  verify_sub->add_option("--fixtures", verify_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*animate_cmd) return animate(anim);
    if (*render_sub) return render_cmd(rend);
    if (*score_sub) return score_cmd(score);
    if (*serve_sub) return serve_cmd(serve);
    if (*verify_sub) return replay_verify(verify_dir);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << e.kind() << ": " << e.what() << "\n";
    return kFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}

}  // namespace pvfx::cli
