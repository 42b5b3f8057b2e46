#include "promptvfx/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "promptvfx/error.hpp"

namespace pvfx {

void AppConfig::apply_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ArgumentError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "transport") transport.mode = llm::parse_transport_mode(v.get<std::string>());
      else if (key == "fixtures") transport.fixtures_dir = v.get<std::string>();
      else if (key == "api_base") transport.api_base = v.get<std::string>();
      else if (key == "api_key") transport.api_key = v.get<std::string>();
      else if (key == "model") transport.model = v.get<std::string>();
      else if (key == "max_in_flight") transport.max_in_flight = v.get<int>();
      else if (key == "m") pipeline.m = v.get<int>();
      else if (key == "fps") pipeline.fps = v.get<double>();
      else if (key == "auto_rounds") pipeline.auto_rounds = v.get<int>();
      else if (key == "seed") pipeline.seed = v.get<std::uint64_t>();
      else if (key == "preview_size") pipeline.preview_size = v.get<int>();
      else if (key == "final_size") pipeline.final_size = v.get<int>();
      else if (key == "mock_scorer") pipeline.mock_scorer = v.get<bool>();
      else if (key == "host") host = v.get<std::string>();
      else if (key == "port") port = v.get<int>();
      else if (key == "data_dir") data_dir = v.get<std::string>();
      else throw ArgumentError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("bad config value: ") + e.what());
  }
}

void AppConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError("config " + path.string() + " is not JSON: " + e.what());
  }
  apply_json(j);
}

void AppConfig::apply_environment() {
  auto env = [](const char* name) -> const char* {
    const char* v = std::getenv(name);
    return v && *v ? v : nullptr;
  };
  if (auto v = env("PVFX_TRANSPORT")) transport.mode = llm::parse_transport_mode(v);
  if (auto v = env("PVFX_FIXTURES")) transport.fixtures_dir = v;
  if (auto v = env("PVFX_API_BASE")) transport.api_base = v;
  if (auto v = env("PVFX_API_KEY")) transport.api_key = v;
  if (auto v = env("PVFX_MODEL")) transport.model = v;
}

void AppConfig::finalize() {
  bool replay = transport.mode == llm::TransportMode::replay;
  transport.zero_timestamps = transport.zero_timestamps || replay;
  pipeline.zero_timestamps = pipeline.zero_timestamps || replay;
  pipeline.model = transport.model;
  pipeline.max_in_flight = transport.max_in_flight;
}

}  // namespace pvfx
