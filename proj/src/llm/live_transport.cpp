#include <chrono>
#include <thread>

#include <httplib.h>

#include "promptvfx/error.hpp"
#include "promptvfx/llm/transport.hpp"
#include "promptvfx/log.hpp"

namespace pvfx::llm {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // e.g. /v1/chat/completions
};

Endpoint split_base(const std::string& base) {
  auto scheme_end = base.find("://");
  if (scheme_end == std::string::npos) throw ArgumentError("endpoint must be a URL: " + base);
  auto path_start = base.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = base.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : base.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  ep.path = prefix + "/chat/completions";
  return ep;
}

}  // namespace

LiveTransport::LiveTransport(TransportConfig config) : config_(std::move(config)) {
  if (config_.api_base.empty()) throw ArgumentError("live transport needs an endpoint");
  split_base(config_.api_base);
}

ChatResponse LiveTransport::complete(const ChatRequest& request) {
  Endpoint ep = split_base(config_.api_base);
  httplib::Client client(ep.origin);
  auto secs = static_cast<time_t>(config_.timeout_seconds);
  client.set_read_timeout(secs, 0);
  client.set_write_timeout(secs, 0);
  client.set_connection_timeout(30, 0);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  json body = request.wire();
  if (body.value("model", "").empty()) body["model"] = config_.model;
  std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt < 4; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::seconds(1 << attempt));
    auto res = client.Post(ep.path, headers, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      log::warn("model call failed: " + last_error);
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      log::warn("model call returned " + last_error + ", retrying");
      continue;
    }
    if (res->status != 200)
      throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 500));
    try {
      return ChatResponse::from_wire(json::parse(res->body));
    } catch (const json::parse_error& e) {
      throw TransportError(std::string("response is not JSON: ") + e.what());
    }
  }
  throw TransportError("model endpoint unreachable: " + last_error);
}

}  // namespace pvfx::llm
