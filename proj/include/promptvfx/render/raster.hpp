#pragma once

#include <cstdint>
#include <vector>

#include "promptvfx/animation.hpp"
#include "promptvfx/render/camera.hpp"

namespace pvfx::render {

// 8-bit RGBA, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgba;
  Vec3 background;

  std::uint8_t* pixel(int x, int y) { return rgba.data() + 4 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* pixel(int x, int y) const {
    return rgba.data() + 4 * (static_cast<std::size_t>(y) * width + x);
  }
  friend bool operator==(const Image& a, const Image& b) {
    return a.width == b.width && a.height == b.height && a.rgba == b.rgba;
  }
};

// Pre-quantization composite: RGB doubles per pixel plus the accumulated
// opacity weight (1 - final transmittance).
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;
  std::vector<double> weight;

  Vec3 at(int x, int y) const {
    std::size_t k = 3 * (static_cast<std::size_t>(y) * width + x);
    return {rgb[k], rgb[k + 1], rgb[k + 2]};
  }
};

inline constexpr double kMinContribution = 1.0 / 255.0;
inline constexpr double kMinTransmittance = 1e-4;

// Projected splats sorted front to back (depth, then splat index).
struct ProjectedSplat {
  Splat2D splat;
  std::uint32_t index = 0;
};
std::vector<ProjectedSplat> project_sorted(const SceneState& state, const Camera& camera, int width,
                                           int height);

/// Depth-sorted front-to-back compositing of every splat in the state.
/// Throws ArgumentError for a zero-area image.
FloatImage rasterize_float(const SceneState& state, const Camera& camera, int width, int height,
                           Vec3 background, unsigned max_threads = 0);

// Round-half-up quantization of a float composite; alpha channel is 255.
Image quantize(const FloatImage& image, Vec3 background);

Image rasterize(const SceneState& state, const Camera& camera, int width, int height,
                Vec3 background = {}, unsigned max_threads = 0);

// Renders frames concurrently; output order matches input order.
std::vector<Image> render_frames(const std::vector<SceneState>& states, const Camera& camera,
                                 int width, int height, Vec3 background = {});

// Mean Rec.601 luma over all pixels, in [0, 255].
double mean_luminance(const Image& image);

// Box-filter downscale so that max(width, height) <= max_side.
Image downscale(const Image& image, int max_side);

}  // namespace pvfx::render
