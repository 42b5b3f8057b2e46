#pragma once

#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "promptvfx/llm/request.hpp"

namespace pvfx::llm {

enum class TransportMode { live, record, replay };

TransportMode parse_transport_mode(std::string_view text);
std::string_view to_string(TransportMode mode);

struct TransportConfig {
  TransportMode mode = TransportMode::replay;
  std::filesystem::path fixtures_dir;  // record and replay
  std::string api_base;                // live and record
  std::string api_key;
  std::string model = "gpt-4o";
  int max_in_flight = 2;
  double timeout_seconds = 120.0;
  bool zero_timestamps = false;

  // Fills api_base, api_key and model from PVFX_API_BASE, PVFX_API_KEY and
  // PVFX_MODEL when those are set and the fields are still defaults.
  void apply_environment();
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual TransportMode mode() const = 0;
  // Whether responses can carry first-token log-probabilities.
  virtual bool supports_logprobs() const { return true; }
};

// One recorded exchange.
struct FixtureEntry {
  json request;  // canonical form
  ChatResponse response;
  std::string timestamp;
};

// transcript.json: {"<request hash>": {"request", "response", "timestamp"}}.
class FixtureStore {
 public:
  static constexpr const char* kFileName = "transcript.json";

  FixtureStore() = default;
  explicit FixtureStore(std::filesystem::path dir);

  // Missing file yields an empty store. Malformed JSON throws FormatError.
  static FixtureStore load(const std::filesystem::path& dir);
  void save() const;

  const FixtureEntry* find(const std::string& hash) const;
  void put(const std::string& hash, FixtureEntry entry);
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::string, FixtureEntry>& entries() const noexcept { return entries_; }
  const std::filesystem::path& dir() const noexcept { return dir_; }

  json to_json() const;
  static FixtureStore from_json(const json& j, std::filesystem::path dir = {});

  // Keys whose stored request no longer hashes to the key.
  std::vector<std::string> verify() const;

 private:
  std::filesystem::path dir_;
  std::map<std::string, FixtureEntry> entries_;
};

// Serves recorded responses. Never touches the network.
class ReplayTransport final : public Transport {
 public:
  explicit ReplayTransport(FixtureStore store) : store_(std::move(store)) {}
  ChatResponse complete(const ChatRequest& request) override;
  TransportMode mode() const override { return TransportMode::replay; }
  const FixtureStore& store() const noexcept { return store_; }

 private:
  FixtureStore store_;
};

// Forwards to another transport and persists every exchange.
class RecordingTransport final : public Transport {
 public:
  RecordingTransport(std::shared_ptr<Transport> inner, FixtureStore store,
                     bool zero_timestamps = false);
  ChatResponse complete(const ChatRequest& request) override;
  TransportMode mode() const override { return TransportMode::record; }
  bool supports_logprobs() const override { return inner_->supports_logprobs(); }
  FixtureStore snapshot() const;

 private:
  std::shared_ptr<Transport> inner_;
  mutable std::mutex mutex_;
  FixtureStore store_;
  bool zero_timestamps_;
};

// Answers from a callback. Used by tests and the fixture generator.
class ScriptedTransport final : public Transport {
 public:
  using Script = std::function<ChatResponse(const ChatRequest&)>;
  explicit ScriptedTransport(Script script) : script_(std::move(script)) {}
  ChatResponse complete(const ChatRequest& request) override { return script_(request); }
  TransportMode mode() const override { return TransportMode::live; }

 private:
  Script script_;
};

// Chat-completions client over HTTP(S).
class LiveTransport final : public Transport {
 public:
  explicit LiveTransport(TransportConfig config);
  ChatResponse complete(const ChatRequest& request) override;
  TransportMode mode() const override { return TransportMode::live; }

 private:
  TransportConfig config_;
};

// Caps the number of concurrent calls into the wrapped transport.
class ThrottledTransport final : public Transport {
 public:
  ThrottledTransport(std::shared_ptr<Transport> inner, int max_in_flight);
  ChatResponse complete(const ChatRequest& request) override;
  TransportMode mode() const override { return inner_->mode(); }
  bool supports_logprobs() const override { return inner_->supports_logprobs(); }
  int peak_in_flight() const;

 private:
  std::shared_ptr<Transport> inner_;
  int cap_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  int in_flight_ = 0;
  int peak_ = 0;
};

// Builds the transport stack for a config. Throws ArgumentError when live or
// record mode lacks an endpoint, or replay mode lacks a fixtures directory.
std::shared_ptr<Transport> make_transport(const TransportConfig& config);

std::string utc_timestamp();

}  // namespace pvfx::llm
