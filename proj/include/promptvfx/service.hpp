#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "promptvfx/config.hpp"
#include "promptvfx/llm/job.hpp"
#include "promptvfx/llm/templates.hpp"
#include "promptvfx/llm/transport.hpp"

namespace pvfx {

// HTTP front end: scene upload, job submission, polling, frame download,
// a server-sent event stream per job, and feedback revisions. Jobs run one
// at a time on a background worker; frames and job.json land under
// <data_dir>/jobs/<id>/.
//
//   GET  /api/healthz
//   POST /api/scenes                  multipart: scene (PLY), mask (text, optional)
//   POST /api/jobs                    {scene_id, prompt, m?, fps?, duration_hint?}
//   GET  /api/jobs/{id}
//   GET  /api/jobs/{id}/frames/{k}    image/png
//   GET  /api/jobs/{id}/stream        text/event-stream: status, scores, frames
//   POST /api/jobs/{id}/feedback      {text}
class Service {
 public:
  Service(AppConfig config, std::shared_ptr<llm::Transport> transport,
          llm::TemplateStore templates = llm::TemplateStore::embedded());
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds without serving. port 0 picks a free port. Returns the bound port
  // or throws IoError.
  int bind(const std::string& host, int port);
  // Serves on the bound socket until stop().
  void run();
  // run() on a background thread.
  void start();
  void stop();

  // Static files (the web client) served from dir at "/".
  void mount_static(const std::string& dir);
  void set_heartbeat(std::chrono::milliseconds interval);

  // Blocks until the job is done or failed, or the timeout expires.
  std::optional<llm::AnimationJob> wait_for(std::uint64_t id, std::chrono::milliseconds timeout);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pvfx
