#include "promptvfx/render/camera.hpp"

#include <cmath>
#include <numbers>

#include "promptvfx/error.hpp"

namespace pvfx::render {

void Camera::validate() const {
  if (eye == target) throw ArgumentError("camera eye equals target");
  if (!(vertical_fov > 0.0 && vertical_fov < 180.0))
    throw ArgumentError("camera fov must be in (0, 180) degrees");
  if (!(near > 0.0)) throw ArgumentError("camera near plane must be positive");
  if (!all_finite(eye) || !all_finite(target) || !all_finite(up))
    throw ArgumentError("camera vectors must be finite");
}

ViewBasis view_basis(const Camera& camera, int width, int height) {
  camera.validate();
  ViewBasis v;
  v.eye = camera.eye;
  v.forward = normalized(camera.target - camera.eye);
  Vec3 up = camera.up;
  if (norm(cross(v.forward, up)) < 1e-9) {
    up = std::fabs(v.forward.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{0, 1, 0};
  }
  v.right = normalized(cross(v.forward, up));
  v.down = cross(v.forward, v.right);
  double half = camera.vertical_fov * std::numbers::pi / 360.0;
  v.focal = 0.5 * height / std::tan(half);
  v.cx = 0.5 * width;
  v.cy = 0.5 * height;
  return v;
}

std::array<double, 9> world_covariance(const GaussianSplat& s) {
  const Quat& q = s.rotation;
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  const double R[9] = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
                       2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                       2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
  const double s2[3] = {s.scale.x * s.scale.x, s.scale.y * s.scale.y, s.scale.z * s.scale.z};
  std::array<double, 9> cov{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += R[r * 3 + k] * s2[k] * R[c * 3 + k];
      cov[r * 3 + c] = acc;
    }
  return cov;
}

std::optional<Splat2D> project(const GaussianSplat& splat, const field::AttributeState& state,
                               const ViewBasis& view, const Camera& camera) {
  Vec3 pc = view.to_camera(state.position);
  if (!(pc.z > camera.near)) return std::nullopt;

  const double f = view.focal;
  const double inv_z = 1.0 / pc.z;
  Splat2D out;
  out.mean_x = f * pc.x * inv_z + view.cx;
  out.mean_y = f * pc.y * inv_z + view.cy;
  out.depth = pc.z;
  out.rgb = state.rgb;
  out.alpha = state.alpha;

  // M = J * W, with J the perspective Jacobian at pc and W the view rotation.
  const double j00 = f * inv_z, j02 = -f * pc.x * inv_z * inv_z;
  const double j11 = f * inv_z, j12 = -f * pc.y * inv_z * inv_z;
  const Vec3 rows[3] = {view.right, view.down, view.forward};
  double M[2][3];
  for (int c = 0; c < 3; ++c) {
    M[0][c] = j00 * rows[0][c] + j02 * rows[2][c];
    M[1][c] = j11 * rows[1][c] + j12 * rows[2][c];
  }
  auto cov = world_covariance(splat);
  double MS[2][3];
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c)
      MS[r][c] = M[r][0] * cov[0 * 3 + c] + M[r][1] * cov[1 * 3 + c] + M[r][2] * cov[2 * 3 + c];
  auto entry = [&](int r, int c) { return MS[r][0] * M[c][0] + MS[r][1] * M[c][1] + MS[r][2] * M[c][2]; };
  out.cov_xx = entry(0, 0) + kCovarianceFloor;
  out.cov_xy = 0.5 * (entry(0, 1) + entry(1, 0));
  out.cov_yy = entry(1, 1) + kCovarianceFloor;
  return out;
}

std::optional<Splat2D> project(const GaussianSplat& splat, const field::AttributeState& state,
                               const Camera& camera, int width, int height) {
  return project(splat, state, view_basis(camera, width, height), camera);
}

field::AttributeState base_state(const GaussianSplat& splat) {
  return {splat.position, dc_to_rgb(splat.sh_dc), splat.opacity};
}

std::vector<Camera> orbit_cameras(const Aabb& box, int count, double vertical_fov) {
  std::vector<Camera> cams;
  const Vec3 center = box.center();
  const double diag = std::max(norm(box.extent()), 1e-3);
  const double half = vertical_fov * std::numbers::pi / 360.0;
  const double dist = 0.6 * diag / std::sin(half);
  const double elevation = 20.0 * std::numbers::pi / 180.0;
  for (int k = 0; k < count; ++k) {
    double azimuth = (-90.0 + 90.0 * k) * std::numbers::pi / 180.0;
    Vec3 dir{std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth),
             std::sin(elevation)};
    Camera c;
    c.eye = center + dist * dir;
    c.target = center;
    c.up = {0.0, 0.0, 1.0};
    c.vertical_fov = vertical_fov;
    c.near = 0.01 * diag;
    cams.push_back(c);
  }
  return cams;
}

}  // namespace pvfx::render
