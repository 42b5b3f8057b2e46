#pragma once

#include <array>
#include <optional>
#include <vector>

#include "promptvfx/field/program.hpp"
#include "promptvfx/splat_io.hpp"
#include "promptvfx/vec3.hpp"

namespace pvfx::render {

struct Camera {
  Vec3 eye{0.0, -3.0, 0.0};
  Vec3 target{0.0, 0.0, 0.0};
  Vec3 up{0.0, 0.0, 1.0};
  double vertical_fov = 50.0;  // degrees
  double near = 0.01;

  // Throws ArgumentError when eye == target, fov is outside (0, 180) or
  // near <= 0.
  void validate() const;
};

// Orthonormal view basis: x right, y down, z forward (into the scene).
struct ViewBasis {
  Vec3 right, down, forward;
  Vec3 eye;
  double focal = 1.0;  // pixels, same in x and y
  double cx = 0.0, cy = 0.0;

  Vec3 to_camera(Vec3 world) const {
    Vec3 d = world - eye;
    return {dot(d, right), dot(d, down), dot(d, forward)};
  }
};

ViewBasis view_basis(const Camera& camera, int width, int height);

// Screen-space Gaussian. cov is the symmetric 2x2 [[xx, xy], [xy, yy]] in
// pixels^2, already regularized.
struct Splat2D {
  double mean_x = 0.0, mean_y = 0.0;
  double cov_xx = 0.0, cov_xy = 0.0, cov_yy = 0.0;
  double depth = 0.0;
  Vec3 rgb;
  double alpha = 0.0;
};

inline constexpr double kCovarianceFloor = 0.3;

// World-space covariance R diag(scale^2) R^T, row-major 3x3.
std::array<double, 9> world_covariance(const GaussianSplat& splat);

/// Projects one splat with its (possibly animated) attributes. Returns
/// nullopt when the center is at or behind the near plane.
std::optional<Splat2D> project(const GaussianSplat& splat, const field::AttributeState& state,
                               const ViewBasis& view, const Camera& camera);
std::optional<Splat2D> project(const GaussianSplat& splat, const field::AttributeState& state,
                               const Camera& camera, int width, int height);

// Base (unanimated) attributes of a splat, with DC-derived color.
field::AttributeState base_state(const GaussianSplat& splat);

// Cameras orbiting the box center at elevation ~20 degrees, framing the box.
std::vector<Camera> orbit_cameras(const Aabb& box, int count, double vertical_fov = 50.0);

}  // namespace pvfx::render
