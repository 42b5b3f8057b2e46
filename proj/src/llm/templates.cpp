#include "promptvfx/llm/templates.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "promptvfx/error.hpp"

namespace pvfx::llm {

const std::map<std::string, std::string>& embedded_templates();

namespace {

constexpr std::array<std::string_view, kTemplateCount> kNames = {
    "abstract_summary",     "centers_behavior",      "rgbs_behavior",
    "opacities_behavior",   "code_centers",          "code_rgbs",
    "code_opacities",       "auto_improve_centers",  "auto_improve_rgbs",
    "auto_improve_opacities", "feedback_centers",    "feedback_rgbs",
    "feedback_opacities",   "score_animation",       "auto_improve_user",
    "feedback_user"};

template <class Fn>
void scan_slots(const std::string& text, Fn fn) {
  std::size_t pos = 0;
  while ((pos = text.find("{{", pos)) != std::string::npos) {
    auto end = text.find("}}", pos + 2);
    if (end == std::string::npos) break;
    fn(pos, end + 2, text.substr(pos + 2, end - pos - 2));
    pos = end + 2;
  }
}

}  // namespace

std::string_view template_name(TemplateId id) { return kNames[static_cast<int>(id)]; }

TemplateStore TemplateStore::embedded() {
  TemplateStore store;
  const auto& files = embedded_templates();
  for (int k = 0; k < kTemplateCount; ++k) {
    auto it = files.find(std::string(kNames[k]));
    if (it == files.end())
      throw ArgumentError("built-in template missing: " + std::string(kNames[k]));
    store.texts_[static_cast<TemplateId>(k)] = it->second;
  }
  auto g = files.find("grammar_reference");
  if (g != files.end()) store.grammar_ = g->second;
  return store;
}

TemplateStore TemplateStore::from_dir(const std::filesystem::path& dir) {
  TemplateStore store = embedded();
  auto read = [](const std::filesystem::path& p, std::string& out) {
    std::ifstream in(p);
    if (!in) return;
    std::stringstream ss;
    ss << in.rdbuf();
    out = ss.str();
  };
  for (int k = 0; k < kTemplateCount; ++k)
    read(dir / (std::string(kNames[k]) + ".txt"), store.texts_[static_cast<TemplateId>(k)]);
  read(dir / "grammar_reference.txt", store.grammar_);
  return store;
}

const std::string& TemplateStore::text(TemplateId id) const { return texts_.at(id); }

std::vector<std::string> TemplateStore::slots(TemplateId id) const {
  std::vector<std::string> out;
  scan_slots(text(id), [&](std::size_t, std::size_t, std::string name) {
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
  });
  return out;
}

std::string TemplateStore::render(TemplateId id, const Slots& values) const {
  const std::string& tpl = text(id);
  std::string out;
  std::size_t last = 0;
  scan_slots(tpl, [&](std::size_t begin, std::size_t end, const std::string& name) {
    auto it = values.find(name);
    if (it == values.end())
      throw ArgumentError("template " + std::string(template_name(id)) + " needs slot '" + name +
                          "'");
    out.append(tpl, last, begin - last);
    out += it->second;
    last = end;
  });
  out.append(tpl, last, std::string::npos);
  return out;
}

}  // namespace pvfx::llm
