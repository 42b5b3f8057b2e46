#include "promptvfx/llm/request.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include "promptvfx/error.hpp"

namespace pvfx::llm {

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(bytes.data(), bytes.size(), digest);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char c : digest) {
    out.push_back(hex[c >> 4]);
    out.push_back(hex[c & 15]);
  }
  return out;
}

std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                          static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::shared_ptr<const EncodedImage> EncodedImage::from_png(std::vector<std::uint8_t> png) {
  auto img = std::make_shared<EncodedImage>();
  img->sha256 = sha256_hex(png);
  img->png = std::move(png);
  return img;
}

json ChatRequest::canonical() const {
  json msgs = json::array();
  for (const auto& m : messages) {
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", m.text}});
    for (const auto& img : m.images)
      content.push_back({{"type", "image"}, {"sha256", img->sha256}, {"bytes", img->png.size()}});
    msgs.push_back({{"role", m.role}, {"content", std::move(content)}});
  }
  json j = {{"model", model},
            {"temperature", temperature},
            {"messages", std::move(msgs)},
            {"logprobs", logprobs},
            {"top_logprobs", top_logprobs},
            {"meta", meta}};
  j["seed"] = seed ? json(*seed) : json(nullptr);
  return j;
}

std::string canonical_hash(const json& canonical) { return sha256_hex(canonical.dump()); }

std::string ChatRequest::hash() const { return canonical_hash(canonical()); }

json ChatRequest::wire() const {
  json msgs = json::array();
  for (const auto& m : messages) {
    if (m.images.empty()) {
      msgs.push_back({{"role", m.role}, {"content", m.text}});
      continue;
    }
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", m.text}});
    for (const auto& img : m.images)
      content.push_back(
          {{"type", "image_url"},
           {"image_url", {{"url", "data:image/png;base64," + base64_encode(img->png)}}}});
    msgs.push_back({{"role", m.role}, {"content", std::move(content)}});
  }
  json j = {{"model", model}, {"temperature", temperature}, {"messages", std::move(msgs)}};
  if (seed) j["seed"] = *seed;
  if (logprobs) {
    j["logprobs"] = true;
    j["top_logprobs"] = top_logprobs;
  }
  return j;
}

json ChatResponse::to_json() const {
  json lp = json::array();
  for (const auto& t : top_logprobs) lp.push_back({{"token", t.token}, {"logprob", t.logprob}});
  json j = {{"text", text}};
  if (!top_logprobs.empty()) j["top_logprobs"] = std::move(lp);
  return j;
}

ChatResponse ChatResponse::from_json(const json& j) {
  ChatResponse r;
  r.text = j.value("text", "");
  if (j.contains("top_logprobs"))
    for (const auto& t : j.at("top_logprobs"))
      r.top_logprobs.push_back({t.at("token").get<std::string>(), t.at("logprob").get<double>()});
  return r;
}

ChatResponse ChatResponse::from_wire(const json& body) {
  try {
    const json& choice = body.at("choices").at(0);
    ChatResponse r;
    const json& content = choice.at("message").at("content");
    r.text = content.is_string() ? content.get<std::string>() : std::string();
    if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array() &&
        !choice["logprobs"]["content"].empty()) {
      const json& first = choice["logprobs"]["content"][0];
      if (first.contains("top_logprobs"))
        for (const auto& t : first["top_logprobs"])
          r.top_logprobs.push_back({t.at("token").get<std::string>(), t.at("logprob").get<double>()});
      else
        r.top_logprobs.push_back({first.at("token").get<std::string>(),
                                  first.at("logprob").get<double>()});
    }
    return r;
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed chat response: ") + e.what());
  }
}

}  // namespace pvfx::llm
