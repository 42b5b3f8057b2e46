#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace pvfx::llm {

using json = nlohmann::json;

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);
std::string base64_encode(std::span<const std::uint8_t> bytes);

// A PNG attached to a message. The digest stands in for the bytes in
// canonical requests and fixtures.
struct EncodedImage {
  std::vector<std::uint8_t> png;
  std::string sha256;

  static std::shared_ptr<const EncodedImage> from_png(std::vector<std::uint8_t> png);
};

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string text;
  std::vector<std::shared_ptr<const EncodedImage>> images;
};

struct ChatRequest {
  std::string model;
  double temperature = 0.0;
  std::optional<std::uint64_t> seed;
  std::vector<ChatMessage> messages;
  bool logprobs = false;
  int top_logprobs = 0;
  // Pipeline bookkeeping (stage, candidate, attempt). Part of the hash so
  // retries are distinct exchanges; never sent to the provider.
  json meta = json::object();

  // Deterministic JSON with images replaced by {"sha256", "bytes"}.
  json canonical() const;
  // SHA-256 of canonical().dump().
  std::string hash() const;
  // Chat-completions request body with images inlined as data URLs.
  json wire() const;
};

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
};

struct ChatResponse {
  std::string text;
  // Alternatives for the first generated token, when the provider reports them.
  std::vector<TokenLogprob> top_logprobs;

  json to_json() const;
  static ChatResponse from_json(const json& j);
  // Parses a chat-completions response body.
  static ChatResponse from_wire(const json& body);
};

// Hash of a canonical request JSON (as stored in fixtures).
std::string canonical_hash(const json& canonical);

}  // namespace pvfx::llm
