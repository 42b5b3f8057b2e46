#include "promptvfx/llm/transport.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "promptvfx/error.hpp"

namespace pvfx::llm {

TransportMode parse_transport_mode(std::string_view text) {
  if (text == "live") return TransportMode::live;
  if (text == "record") return TransportMode::record;
  if (text == "replay") return TransportMode::replay;
  throw ArgumentError("unknown transport mode '" + std::string(text) + "'");
}

std::string_view to_string(TransportMode mode) {
  switch (mode) {
    case TransportMode::live: return "live";
    case TransportMode::record: return "record";
    case TransportMode::replay: return "replay";
  }
  return "replay";
}

void TransportConfig::apply_environment() {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
  if (api_base.empty())
    if (auto v = env("PVFX_API_BASE")) api_base = *v;
  if (api_key.empty())
    if (auto v = env("PVFX_API_KEY")) api_key = *v;
  if (auto v = env("PVFX_MODEL"); v && model == TransportConfig{}.model) model = *v;
}

std::string utc_timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---- FixtureStore ----

FixtureStore::FixtureStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

FixtureStore FixtureStore::load(const std::filesystem::path& dir) {
  auto path = dir / kFileName;
  if (!std::filesystem::exists(path)) return FixtureStore(dir);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw FormatError("transcript", e.what());
  }
  return from_json(j, dir);
}

void FixtureStore::save() const {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  auto path = dir_ / kFileName;
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << to_json().dump(1) << '\n';
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot write " + path.string() + ": " + ec.message());
}

const FixtureEntry* FixtureStore::find(const std::string& hash) const {
  auto it = entries_.find(hash);
  return it == entries_.end() ? nullptr : &it->second;
}

void FixtureStore::put(const std::string& hash, FixtureEntry entry) {
  entries_[hash] = std::move(entry);
}

json FixtureStore::to_json() const {
  json j = json::object();
  for (const auto& [hash, e] : entries_)
    j[hash] = {{"request", e.request}, {"response", e.response.to_json()},
               {"timestamp", e.timestamp}};
  return j;
}

FixtureStore FixtureStore::from_json(const json& j, std::filesystem::path dir) {
  if (!j.is_object()) throw FormatError("transcript", "top level must be an object");
  FixtureStore store(std::move(dir));
  try {
    for (const auto& [hash, e] : j.items()) {
      FixtureEntry entry;
      entry.request = e.at("request");
      entry.response = ChatResponse::from_json(e.at("response"));
      entry.timestamp = e.value("timestamp", "");
      store.entries_.emplace(hash, std::move(entry));
    }
  } catch (const json::exception& e) {
    throw FormatError("transcript", e.what());
  }
  return store;
}

std::vector<std::string> FixtureStore::verify() const {
  std::vector<std::string> bad;
  for (const auto& [hash, e] : entries_)
    if (canonical_hash(e.request) != hash) bad.push_back(hash);
  return bad;
}

// ---- transports ----

ChatResponse ReplayTransport::complete(const ChatRequest& request) {
  std::string hash = request.hash();
  if (const FixtureEntry* e = store_.find(hash)) return e->response;
  throw ReplayMissError(hash);
}

RecordingTransport::RecordingTransport(std::shared_ptr<Transport> inner, FixtureStore store,
                                       bool zero_timestamps)
    : inner_(std::move(inner)), store_(std::move(store)), zero_timestamps_(zero_timestamps) {}

ChatResponse RecordingTransport::complete(const ChatRequest& request) {
  ChatResponse response = inner_->complete(request);
  FixtureEntry entry{request.canonical(), response,
                     zero_timestamps_ ? std::string("1970-01-01T00:00:00Z") : utc_timestamp()};
  std::lock_guard lock(mutex_);
  store_.put(request.hash(), std::move(entry));
  if (!store_.dir().empty()) store_.save();
  return response;
}

FixtureStore RecordingTransport::snapshot() const {
  std::lock_guard lock(mutex_);
  return store_;
}

ThrottledTransport::ThrottledTransport(std::shared_ptr<Transport> inner, int max_in_flight)
    : inner_(std::move(inner)), cap_(std::max(1, max_in_flight)) {}

ChatResponse ThrottledTransport::complete(const ChatRequest& request) {
  {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return in_flight_ < cap_; });
    ++in_flight_;
    peak_ = std::max(peak_, in_flight_);
  }
  struct Release {
    ThrottledTransport* self;
    ~Release() {
      {
        std::lock_guard lock(self->mutex_);
        --self->in_flight_;
      }
      self->cv_.notify_one();
    }
  } release{this};
  return inner_->complete(request);
}

int ThrottledTransport::peak_in_flight() const {
  std::lock_guard lock(mutex_);
  return peak_;
}

std::shared_ptr<Transport> make_transport(const TransportConfig& config) {
  std::shared_ptr<Transport> base;
  switch (config.mode) {
    case TransportMode::replay:
      if (config.fixtures_dir.empty()) throw ArgumentError("replay mode needs a fixtures directory");
      if (!std::filesystem::exists(config.fixtures_dir / FixtureStore::kFileName))
        throw ArgumentError("no " + std::string(FixtureStore::kFileName) + " in " +
                            config.fixtures_dir.string());
      base = std::make_shared<ReplayTransport>(FixtureStore::load(config.fixtures_dir));
      break;
    case TransportMode::record:
      if (config.api_base.empty()) throw ArgumentError("record mode needs PVFX_API_BASE");
      if (config.fixtures_dir.empty()) throw ArgumentError("record mode needs a fixtures directory");
      base = std::make_shared<RecordingTransport>(std::make_shared<LiveTransport>(config),
                                                  FixtureStore::load(config.fixtures_dir),
                                                  config.zero_timestamps);
      break;
    case TransportMode::live:
      if (config.api_base.empty()) throw ArgumentError("live mode needs PVFX_API_BASE");
      base = std::make_shared<LiveTransport>(config);
      break;
  }
  return std::make_shared<ThrottledTransport>(std::move(base), config.max_in_flight);
}

}  // namespace pvfx::llm
