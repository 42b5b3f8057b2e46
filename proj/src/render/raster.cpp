#include "promptvfx/render/raster.hpp"

#include <algorithm>
#include <cmath>

#include "promptvfx/error.hpp"
#include "promptvfx/parallel.hpp"

namespace pvfx::render {

std::vector<ProjectedSplat> project_sorted(const SceneState& state, const Camera& camera, int width,
                                           int height) {
  const Scene& scene = *state.base;
  const ViewBasis view = view_basis(camera, width, height);
  const std::size_t n = scene.size();

  // Masked splats take their animated attributes; the rest keep the base.
  std::vector<const field::AttributeState*> animated(n, nullptr);
  for (std::size_t k = 0; k < state.mask.size(); ++k)
    animated[state.mask.indices()[k]] = &state.states[k];

  std::vector<std::optional<Splat2D>> projected(n);
  parallel_for(n, 4096, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const GaussianSplat& s = scene.splats[i];
      field::AttributeState attrs = animated[i] ? *animated[i] : base_state(s);
      projected[i] = project(s, attrs, view, camera);
    }
  });

  std::vector<ProjectedSplat> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (projected[i] && projected[i]->alpha >= kMinContribution)
      out.push_back({*projected[i], static_cast<std::uint32_t>(i)});
  std::sort(out.begin(), out.end(), [](const ProjectedSplat& a, const ProjectedSplat& b) {
    if (a.splat.depth != b.splat.depth) return a.splat.depth < b.splat.depth;
    return a.index < b.index;
  });
  return out;
}

namespace {

struct Footprint {
  double conic_xx, conic_xy, conic_yy;  // inverse covariance
  int x0, x1, y0, y1;                   // inclusive pixel range
};

// Pixels whose contribution can reach kMinContribution. Outside the
// ellipse q <= 2 ln(255 alpha) the weight is below the cutoff anyway.
bool footprint(const Splat2D& s, int width, int height, Footprint& fp) {
  double det = s.cov_xx * s.cov_yy - s.cov_xy * s.cov_xy;
  if (!(det > 0.0)) return false;
  fp.conic_xx = s.cov_yy / det;
  fp.conic_xy = -s.cov_xy / det;
  fp.conic_yy = s.cov_xx / det;
  double q_max = 2.0 * std::log(s.alpha / kMinContribution);
  if (!(q_max >= 0.0)) return false;
  double ex = std::sqrt(q_max * s.cov_xx), ey = std::sqrt(q_max * s.cov_yy);
  // pixel centers sit at +0.5
  double fx0 = std::floor(s.mean_x - ex - 0.5), fx1 = std::ceil(s.mean_x + ex - 0.5);
  double fy0 = std::floor(s.mean_y - ey - 0.5), fy1 = std::ceil(s.mean_y + ey - 0.5);
  if (!(fx1 >= 0.0 && fy1 >= 0.0 && fx0 < width && fy0 < height)) return false;
  fp.x0 = static_cast<int>(std::max(fx0, 0.0));
  fp.y0 = static_cast<int>(std::max(fy0, 0.0));
  fp.x1 = static_cast<int>(std::min(fx1, static_cast<double>(width - 1)));
  fp.y1 = static_cast<int>(std::min(fy1, static_cast<double>(height - 1)));
  return fp.x0 <= fp.x1 && fp.y0 <= fp.y1;
}

}  // namespace

FloatImage rasterize_float(const SceneState& state, const Camera& camera, int width, int height,
                           Vec3 background, unsigned max_threads) {
  if (width <= 0 || height <= 0) throw ArgumentError("image must have positive area");
  const auto splats = project_sorted(state, camera, width, height);

  std::vector<Footprint> fps(splats.size());
  std::vector<std::uint8_t> visible(splats.size(), 0);
  for (std::size_t k = 0; k < splats.size(); ++k)
    visible[k] = footprint(splats[k].splat, width, height, fps[k]);

  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  std::vector<double> color(3 * pixels, 0.0);
  std::vector<double> transmittance(pixels, 1.0);
  std::vector<std::uint8_t> done(pixels, 0);

  // Rows are independent; each band walks the sorted list in order, so the
  // per-pixel arithmetic is identical for any banding.
  parallel_for(
      static_cast<std::size_t>(height), 16,
      [&](std::size_t row0, std::size_t row1) {
        for (std::size_t k = 0; k < splats.size(); ++k) {
          if (!visible[k]) continue;
          const Footprint& fp = fps[k];
          int y0 = std::max<int>(fp.y0, static_cast<int>(row0));
          int y1 = std::min<int>(fp.y1, static_cast<int>(row1) - 1);
          if (y0 > y1) continue;
          const Splat2D& s = splats[k].splat;
          for (int y = y0; y <= y1; ++y) {
            const double dy = (y + 0.5) - s.mean_y;
            for (int x = fp.x0; x <= fp.x1; ++x) {
              const std::size_t p = static_cast<std::size_t>(y) * width + x;
              if (done[p]) continue;
              const double dx = (x + 0.5) - s.mean_x;
              const double q = fp.conic_xx * dx * dx + 2.0 * fp.conic_xy * dx * dy +
                               fp.conic_yy * dy * dy;
              const double a = s.alpha * std::exp(-0.5 * q);
              if (a < kMinContribution) continue;
              const double w = a * transmittance[p];
              color[3 * p] += s.rgb.x * w;
              color[3 * p + 1] += s.rgb.y * w;
              color[3 * p + 2] += s.rgb.z * w;
              transmittance[p] *= 1.0 - a;
              if (transmittance[p] < kMinTransmittance) done[p] = 1;
            }
          }
        }
      },
      max_threads);

  FloatImage out;
  out.width = width;
  out.height = height;
  out.rgb.resize(3 * pixels);
  out.weight.resize(pixels);
  for (std::size_t p = 0; p < pixels; ++p) {
    const double T = transmittance[p];
    out.rgb[3 * p] = color[3 * p] + T * background.x;
    out.rgb[3 * p + 1] = color[3 * p + 1] + T * background.y;
    out.rgb[3 * p + 2] = color[3 * p + 2] + T * background.z;
    out.weight[p] = 1.0 - T;
  }
  return out;
}

Image quantize(const FloatImage& f, Vec3 background) {
  Image img;
  img.width = f.width;
  img.height = f.height;
  img.background = background;
  const std::size_t pixels = static_cast<std::size_t>(f.width) * f.height;
  img.rgba.resize(4 * pixels);
  auto q = [](double v) {
    double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
  };
  for (std::size_t p = 0; p < pixels; ++p) {
    img.rgba[4 * p] = q(f.rgb[3 * p]);
    img.rgba[4 * p + 1] = q(f.rgb[3 * p + 1]);
    img.rgba[4 * p + 2] = q(f.rgb[3 * p + 2]);
    img.rgba[4 * p + 3] = 255;
  }
  return img;
}

Image rasterize(const SceneState& state, const Camera& camera, int width, int height,
                Vec3 background, unsigned max_threads) {
  return quantize(rasterize_float(state, camera, width, height, background, max_threads),
                  background);
}

std::vector<Image> render_frames(const std::vector<SceneState>& states, const Camera& camera,
                                 int width, int height, Vec3 background) {
  if (width <= 0 || height <= 0) throw ArgumentError("image must have positive area");
  std::vector<Image> frames(states.size());
  parallel_for(states.size(), 1, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k)
      frames[k] = rasterize(states[k], camera, width, height, background, 1);
  });
  return frames;
}

double mean_luminance(const Image& image) {
  const std::size_t pixels = static_cast<std::size_t>(image.width) * image.height;
  if (pixels == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t p = 0; p < pixels; ++p)
    sum += 0.299 * image.rgba[4 * p] + 0.587 * image.rgba[4 * p + 1] + 0.114 * image.rgba[4 * p + 2];
  return sum / static_cast<double>(pixels);
}

Image downscale(const Image& image, int max_side) {
  int side = std::max(image.width, image.height);
  if (side <= max_side || max_side <= 0) return image;
  int factor = (side + max_side - 1) / max_side;
  Image out;
  out.width = std::max(1, image.width / factor);
  out.height = std::max(1, image.height / factor);
  out.background = image.background;
  out.rgba.assign(4 * static_cast<std::size_t>(out.width) * out.height, 0);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < 4; ++c) {
        unsigned sum = 0, count = 0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx) {
            int sx = x * factor + dx, sy = y * factor + dy;
            if (sx < image.width && sy < image.height) {
              sum += image.pixel(sx, sy)[c];
              ++count;
            }
          }
        out.pixel(x, y)[c] = static_cast<std::uint8_t>((sum + count / 2) / count);
      }
  return out;
}

}  // namespace pvfx::render
