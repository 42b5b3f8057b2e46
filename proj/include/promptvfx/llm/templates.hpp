#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace pvfx::llm {

enum class TemplateId {
  abstract_summary,
  centers_behavior,
  rgbs_behavior,
  opacities_behavior,
  code_centers,
  code_rgbs,
  code_opacities,
  auto_improve_centers,
  auto_improve_rgbs,
  auto_improve_opacities,
  feedback_centers,
  feedback_rgbs,
  feedback_opacities,
  score_animation,
  auto_improve_user,
  feedback_user,
};

inline constexpr int kTemplateCount = 16;

std::string_view template_name(TemplateId id);

using Slots = std::map<std::string, std::string>;

// Prompt texts with {{slot}} placeholders. The built-in set is compiled
// from data/templates/; a directory of .txt files can override it.
class TemplateStore {
 public:
  static TemplateStore embedded();
  // Files named <template_name>.txt; missing ones fall back to built-ins.
  static TemplateStore from_dir(const std::filesystem::path& dir);

  const std::string& text(TemplateId id) const;
  std::vector<std::string> slots(TemplateId id) const;

  // Throws ArgumentError naming the first referenced slot absent from
  // `values`.
  std::string render(TemplateId id, const Slots& values) const;

  const std::string& grammar_reference() const noexcept { return grammar_; }

 private:
  std::map<TemplateId, std::string> texts_;
  std::string grammar_;
};

}  // namespace pvfx::llm
