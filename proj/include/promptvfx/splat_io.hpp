#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "promptvfx/vec3.hpp"

namespace pvfx {

inline constexpr int kShRestCount = 45;
// Logit cap applied when writing opacities of exactly 0 or 1.
inline constexpr double kOpacityLogitCap = 15.0;

// One elliptical Gaussian in canonical in-memory units: linear scale,
// opacity in [0,1], unit-norm rotation (w, x, y, z).
struct GaussianSplat {
  Vec3 position;
  Quat rotation;
  Vec3 scale{1.0, 1.0, 1.0};
  Vec3 sh_dc;
  double opacity = 1.0;
};

// Splat order is an identity: index i names the same Gaussian before and
// after a save/load round trip.
struct Scene {
  std::vector<GaussianSplat> splats;
  // Degree 1-3 SH coefficients, splats.size() * kShRestCount floats when
  // present, empty otherwise. Carried opaquely, never shaded.
  std::vector<float> sh_rest;
  std::string source_path;

  std::size_t size() const noexcept { return splats.size(); }
  bool has_sh_rest() const noexcept { return !sh_rest.empty(); }
};

// Sorted, duplicate-free indices into a Scene.
class SelectionMask {
 public:
  SelectionMask() = default;
  // Validates against a scene of `scene_size` splats; throws MaskError.
  SelectionMask(std::vector<std::uint32_t> indices, std::size_t scene_size);

  static SelectionMask all(std::size_t scene_size);

  std::span<const std::uint32_t> indices() const noexcept { return indices_; }
  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  bool contains(std::uint32_t index) const;

  friend bool operator==(const SelectionMask&, const SelectionMask&) = default;

 private:
  std::vector<std::uint32_t> indices_;
};

struct Aabb {
  Vec3 min;
  Vec3 max;
  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
};

// DC band to RGB: clamp(0.5 + SH_C0 * dc, 0, 1).
inline constexpr double kShC0 = 0.28209479177387814;
Vec3 dc_to_rgb(Vec3 sh_dc);
Vec3 rgb_to_dc(Vec3 rgb);

double sigmoid(double x);
// Inverse of sigmoid with the result clamped to +-kOpacityLogitCap.
double clamped_logit(double p);

// Binary little-endian point-cloud encoding (3DGS property layout).
std::vector<std::uint8_t> encode_scene(const Scene& scene);
Scene decode_scene(std::span<const std::uint8_t> bytes, std::string source_path = {});

Scene load_scene(const std::filesystem::path& path);
void save_scene(const Scene& scene, const std::filesystem::path& path);

SelectionMask parse_mask(std::string_view text, const Scene& scene);
SelectionMask load_mask(const std::filesystem::path& path, const Scene& scene);
std::string format_mask(const SelectionMask& mask);

// Componentwise min/max over the selected positions. Throws
// EmptySelectionError for an empty mask.
Aabb bounds(const Scene& scene, const SelectionMask& mask);
// Mean of the selected positions.
Vec3 centroid(const Scene& scene, const SelectionMask& mask);

}  // namespace pvfx
