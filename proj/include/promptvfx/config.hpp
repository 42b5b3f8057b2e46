#pragma once

#include <filesystem>
#include <string>

#include "promptvfx/llm/pipeline.hpp"
#include "promptvfx/llm/transport.hpp"

namespace pvfx {

// Settings shared by the CLI and the server. Layering, lowest first:
// built-in defaults, JSON config file, environment, command-line flags.
struct AppConfig {
  llm::TransportConfig transport;
  llm::PipelineConfig pipeline;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "pvfx_data";

  // Recognized keys: transport, fixtures, api_base, api_key, model,
  // max_in_flight, m, fps, auto_rounds, seed, preview_size, final_size,
  // mock_scorer, host, port, data_dir. Unknown keys throw ArgumentError.
  void apply_json(const nlohmann::json& j);
  void apply_file(const std::filesystem::path& path);
  // PVFX_TRANSPORT, PVFX_FIXTURES, PVFX_API_BASE, PVFX_API_KEY, PVFX_MODEL.
  void apply_environment();
  // Derived settings: replay zeroes timestamps, the model name and in-flight
  // cap are shared between transport and pipeline.
  void finalize();
};

}  // namespace pvfx
