#include "promptvfx/service.hpp"

#include <condition_variable>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "promptvfx/error.hpp"
#include "promptvfx/llm/pipeline.hpp"
#include "promptvfx/log.hpp"
#include "promptvfx/render/png.hpp"

namespace pvfx {

namespace {

using llm::json;

struct Event {
  std::string type;  // status | scores | frames
  json data;
};

struct SceneEntry {
  std::shared_ptr<const Scene> scene;
  SelectionMask mask;
};

struct JobSlot {
  llm::AnimationJob job;
  std::string scene_id;
  std::filesystem::path dir;
  std::vector<Event> events;
  std::size_t frames_ready = 0;
  llm::JobStatus last_status = llm::JobStatus::queued;
  json last_scores;
};

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind,
                const std::string& message) {
  send_json(res, status, {{"error", kind}, {"message", message}});
}

json scores_of(const llm::AnimationJob& job) {
  json scores = json::array();
  for (const auto& h : job.hypotheses) scores.push_back(h.score ? json(*h.score) : json(nullptr));
  return {{"scores", std::move(scores)},
          {"selected_index", job.selected_index ? json(*job.selected_index) : json(nullptr)}};
}

std::string sse_frame(const Event& e) {
  return "event: " + e.type + "\ndata: " + e.data.dump() + "\n\n";
}

}  // namespace

struct Service::Impl {
  AppConfig config;
  std::shared_ptr<llm::Transport> transport;
  llm::TemplateStore templates;
  httplib::Server server;
  std::thread server_thread;
  std::chrono::milliseconds heartbeat{5000};

  std::mutex mutex;
  std::condition_variable changed;
  std::map<std::string, SceneEntry> scenes;
  std::map<std::uint64_t, JobSlot> jobs;
  std::uint64_t next_scene = 1;
  std::uint64_t next_job = 1;
  bool stopping = false;

  std::deque<std::function<void()>> queue;
  std::condition_variable queue_cv;
  std::thread worker;

  Impl(AppConfig cfg, std::shared_ptr<llm::Transport> t, llm::TemplateStore tpl)
      : config(std::move(cfg)), transport(std::move(t)), templates(std::move(tpl)) {
    config.finalize();
    worker = std::thread([this] { work(); });
    routes();
  }

  ~Impl() {
    {
      std::lock_guard lock(mutex);
      stopping = true;
    }
    queue_cv.notify_all();
    changed.notify_all();
    server.stop();
    if (server_thread.joinable()) server_thread.join();
    if (worker.joinable()) worker.join();
  }

  void work() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock lock(mutex);
        queue_cv.wait(lock, [&] { return stopping || !queue.empty(); });
        if (stopping) return;
        task = std::move(queue.front());
        queue.pop_front();
      }
      try {
        task();
      } catch (const std::exception& e) {
        log::warn(std::string("job worker: ") + e.what());
      }
    }
  }

  void enqueue(std::function<void()> task) {
    {
      std::lock_guard lock(mutex);
      queue.push_back(std::move(task));
    }
    queue_cv.notify_one();
  }

  // Called from the worker with every job update; records events.
  void publish(std::uint64_t id, const llm::AnimationJob& job) {
    std::lock_guard lock(mutex);
    JobSlot& slot = jobs.at(id);
    slot.job = job;
    slot.job.transcript.clear();
    json scores = scores_of(job);
    if (!job.hypotheses.empty() && scores != slot.last_scores) {
      slot.last_scores = scores;
      slot.events.push_back({"scores", scores});
    }
    if (job.status != slot.last_status) {
      slot.last_status = job.status;
      json data = {{"id", id}, {"status", llm::to_string(job.status)}};
      if (job.status == llm::JobStatus::failed) data["stage"] = job.failed_stage;
      slot.events.push_back({"status", std::move(data)});
    }
    changed.notify_all();
  }

  void frame_ready(std::uint64_t id, std::size_t k, const render::Image& image,
                   const std::filesystem::path& dir) {
    render::write_png(image, dir / "frames" / render::frame_name(k));
    std::lock_guard lock(mutex);
    JobSlot& slot = jobs.at(id);
    slot.frames_ready = k + 1;
    slot.events.push_back({"frames", {{"indices", json::array({k})}}});
    changed.notify_all();
  }

  void persist(const llm::AnimationJob& job, const std::filesystem::path& dir) {
    std::ofstream out(dir / "job.json");
    out << job.to_json().dump(2) << '\n';
  }

  llm::JobHooks hooks_for(std::uint64_t id, const std::filesystem::path& dir) {
    llm::JobHooks hooks;
    // Terminal states are published after job.json is on disk.
    hooks.on_update = [this, id](const llm::AnimationJob& job) {
      if (!llm::is_terminal(job.status)) publish(id, job);
    };
    hooks.on_frame = [this, id, dir](std::size_t k, const render::Image& img) {
      frame_ready(id, k, img, dir);
    };
    return hooks;
  }

  std::filesystem::path make_job_dir(std::uint64_t id) {
    auto dir = config.data_dir / "jobs" / std::to_string(id);
    std::filesystem::create_directories(dir / "frames");
    return dir;
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });
    server.Get("/api/healthz", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}});
    });
    server.Post("/api/scenes", [this](const httplib::Request& req, httplib::Response& res) {
      upload_scene(req, res);
    });
    server.Post("/api/jobs", [this](const httplib::Request& req, httplib::Response& res) {
      submit_job(req, res);
    });
    server.Get(R"(/api/jobs/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::uint64_t id = std::stoull(req.matches[1]);
      std::lock_guard lock(mutex);
      auto it = jobs.find(id);
      if (it == jobs.end()) return send_error(res, 404, "NotFound", "no such job");
      json view = it->second.job.status_view();
      view["frame_count"] = it->second.frames_ready;
      send_json(res, 200, view);
    });
    server.Get(R"(/api/jobs/(\d+)/frames/(\d+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 serve_frame(req, res);
               });
    server.Get(R"(/api/jobs/(\d+)/stream)",
               [this](const httplib::Request& req, httplib::Response& res) { stream(req, res); });
    server.Post(R"(/api/jobs/(\d+)/feedback)",
                [this](const httplib::Request& req, httplib::Response& res) { feedback(req, res); });
  }

  void upload_scene(const httplib::Request& req, httplib::Response& res) {
    if (!req.has_file("scene")) return send_error(res, 400, "FormatError", "missing 'scene' part");
    const auto& file = req.get_file_value("scene");
    try {
      auto scene = std::make_shared<Scene>(decode_scene(
          std::span(reinterpret_cast<const std::uint8_t*>(file.content.data()), file.content.size()),
          file.filename));
      SelectionMask mask = req.has_file("mask")
                               ? parse_mask(req.get_file_value("mask").content, *scene)
                               : SelectionMask::all(scene->size());
      std::size_t splats = scene->size(), selected = mask.size();
      std::string id;
      {
        std::lock_guard lock(mutex);
        id = "scene-" + std::to_string(next_scene++);
        scenes.emplace(id, SceneEntry{std::move(scene), std::move(mask)});
      }
      send_json(res, 200, {{"scene_id", id}, {"splats", splats}, {"selected", selected}});
    } catch (const Error& e) {
      send_error(res, 400, e.kind(), e.what());
    }
  }

  void submit_job(const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      return send_error(res, 400, "FormatError", e.what());
    }
    if (!body.is_object()) return send_error(res, 400, "FormatError", "body must be an object");
    std::string scene_id = body.value("scene_id", "");
    std::string prompt = body.contains("prompt") && body["prompt"].is_string()
                             ? body["prompt"].get<std::string>()
                             : std::string();
    llm::PipelineConfig pc = config.pipeline;
    try {
      if (body.contains("m") && !body["m"].is_null()) pc.m = body["m"].get<int>();
      if (body.contains("fps") && !body["fps"].is_null()) pc.fps = body["fps"].get<double>();
      if (body.contains("duration_hint") && !body["duration_hint"].is_null())
        pc.duration_hint = body["duration_hint"].get<double>();
      pc.validate();
    } catch (const json::exception& e) {
      return send_error(res, 400, "ArgumentError", e.what());
    } catch (const Error& e) {
      return send_error(res, 400, e.kind(), e.what());
    }

    std::uint64_t id;
    SceneEntry scene;
    std::filesystem::path dir;
    {
      std::lock_guard lock(mutex);
      auto it = scenes.find(scene_id);
      if (it == scenes.end()) return send_error(res, 404, "NotFound", "unknown scene_id");
      if (prompt.find_first_not_of(" \t\r\n") == std::string::npos)
        return send_error(res, 422, "ArgumentError", "prompt must not be empty");
      scene = it->second;
      id = next_job++;
      JobSlot slot;
      slot.job.id = id;
      slot.job.prompt = prompt;
      slot.scene_id = scene_id;
      slot.events.push_back({"status", {{"id", id}, {"status", "queued"}}});
      jobs.emplace(id, std::move(slot));
    }
    dir = make_job_dir(id);
    {
      std::lock_guard lock(mutex);
      jobs.at(id).dir = dir;
    }
    enqueue([this, id, pc, scene, dir, prompt] {
      llm::Pipeline pipeline(transport, pc, templates);
      llm::AnimationJob job;
      job.id = id;
      job.prompt = prompt;
      job = pipeline.run_job(scene.scene, scene.mask, std::move(job), hooks_for(id, dir));
      persist(job, dir);
      publish(id, job);
    });
    send_json(res, 202, {{"job_id", id}});
  }

  void serve_frame(const httplib::Request& req, httplib::Response& res) {
    std::uint64_t id = std::stoull(req.matches[1]);
    std::size_t k = std::stoull(req.matches[2]);
    std::filesystem::path path;
    {
      std::lock_guard lock(mutex);
      auto it = jobs.find(id);
      if (it == jobs.end()) return send_error(res, 404, "NotFound", "no such job");
      if (k >= it->second.frames_ready) return send_error(res, 404, "NotFound", "no such frame");
      path = it->second.dir / "frames" / render::frame_name(k);
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) return send_error(res, 404, "NotFound", "frame file missing");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    res.set_content(std::move(bytes), "image/png");
  }

  void stream(const httplib::Request& req, httplib::Response& res) {
    std::uint64_t id = std::stoull(req.matches[1]);
    {
      std::lock_guard lock(mutex);
      if (!jobs.count(id)) return send_error(res, 404, "NotFound", "no such job");
    }
    auto cursor = std::make_shared<std::size_t>(0);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream", [this, id, cursor](std::size_t, httplib::DataSink& sink) {
          std::vector<Event> pending;
          bool finished = false;
          {
            std::unique_lock lock(mutex);
            auto ready = [&] { return stopping || jobs.at(id).events.size() > *cursor; };
            if (!changed.wait_for(lock, heartbeat, ready)) {
              lock.unlock();
              static const std::string beat = ": heartbeat\n\n";
              return sink.write(beat.data(), beat.size());
            }
            if (stopping) {
              sink.done();
              return true;
            }
            const JobSlot& slot = jobs.at(id);
            pending.assign(slot.events.begin() + static_cast<std::ptrdiff_t>(*cursor),
                           slot.events.end());
            *cursor = slot.events.size();
            finished = llm::is_terminal(slot.last_status);
          }
          for (const auto& e : pending) {
            std::string text = sse_frame(e);
            if (!sink.write(text.data(), text.size())) return false;
          }
          if (finished) sink.done();
          return true;
        });
  }

  void feedback(const httplib::Request& req, httplib::Response& res) {
    std::uint64_t parent_id = std::stoull(req.matches[1]);
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      return send_error(res, 400, "FormatError", e.what());
    }
    std::string text = body.is_object() && body.contains("text") && body["text"].is_string()
                           ? body["text"].get<std::string>()
                           : std::string();
    std::uint64_t id;
    llm::AnimationJob parent;
    SceneEntry scene;
    {
      std::lock_guard lock(mutex);
      auto it = jobs.find(parent_id);
      if (it == jobs.end()) return send_error(res, 404, "NotFound", "no such job");
      if (it->second.job.status != llm::JobStatus::done)
        return send_error(res, 409, "Conflict", "job is not done");
      if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        return send_error(res, 422, "ArgumentError", "feedback must not be empty");
      parent = it->second.job;
      scene = scenes.at(it->second.scene_id);
      id = next_job++;
      JobSlot slot;
      slot.job.id = id;
      slot.job.parent = parent_id;
      slot.job.prompt = parent.prompt;
      slot.scene_id = it->second.scene_id;
      slot.events.push_back({"status", {{"id", id}, {"status", "queued"}}});
      jobs.emplace(id, std::move(slot));
    }
    auto dir = make_job_dir(id);
    {
      std::lock_guard lock(mutex);
      jobs.at(id).dir = dir;
    }
    llm::PipelineConfig pc = config.pipeline;
    pc.fps = parent.fps;
    enqueue([this, id, pc, parent, scene, dir, text] {
      llm::Pipeline pipeline(transport, pc, templates);
      llm::AnimationJob job =
          pipeline.revise(parent, scene.scene, scene.mask, text, id, hooks_for(id, dir));
      persist(job, dir);
      publish(id, job);
    });
    send_json(res, 202, {{"job_id", id}, {"parent", parent_id}});
  }
};

Service::Service(AppConfig config, std::shared_ptr<llm::Transport> transport,
                 llm::TemplateStore templates)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(transport), std::move(templates))) {}

Service::~Service() = default;

int Service::bind(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                        : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::start() {
  impl_->server_thread = std::thread([this] { run(); });
  impl_->server.wait_until_ready();
}

void Service::stop() {
  {
    std::lock_guard lock(impl_->mutex);
    impl_->stopping = true;
  }
  impl_->changed.notify_all();
  impl_->queue_cv.notify_all();
  impl_->server.stop();
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
}

void Service::mount_static(const std::string& dir) {
  if (!impl_->server.set_mount_point("/", dir))
    throw IoError("static directory not found: " + dir);
}

void Service::set_heartbeat(std::chrono::milliseconds interval) { impl_->heartbeat = interval; }

std::optional<llm::AnimationJob> Service::wait_for(std::uint64_t id,
                                                   std::chrono::milliseconds timeout) {
  std::unique_lock lock(impl_->mutex);
  auto it = impl_->jobs.find(id);
  if (it == impl_->jobs.end()) return std::nullopt;
  bool ok = impl_->changed.wait_for(lock, timeout, [&] {
    return llm::is_terminal(impl_->jobs.at(id).last_status);
  });
  if (!ok) return std::nullopt;
  return impl_->jobs.at(id).job;
}

}  // namespace pvfx
