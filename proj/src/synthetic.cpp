#include "promptvfx/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "promptvfx/field/noise.hpp"

namespace pvfx {

std::uint64_t SplitMix::next() {
  state_ += 0x9E3779B97F4A7C15ull;
  return field::splitmix64(state_);
}

double SplitMix::uniform() { return field::unit_interval(next()); }

double SplitMix::normal() {
  double u1 = std::max(uniform(), 1e-300);
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

Quat random_rotation(SplitMix& rng) {
  Quat q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
  double n = norm(q);
  if (n < 1e-9) return Quat{};
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

double vase_radius(double z) {
  // Narrow foot, round belly, narrow neck, slight lip.
  double u = z / 0.8;
  return 0.10 + 0.16 * std::sin(std::numbers::pi * std::min(u * 1.15, 1.0)) + 0.04 * u * u * u;
}

Scene canonical(Scene raw) { return decode_scene(encode_scene(raw)); }

}  // namespace

SyntheticScene make_vase_scene(std::size_t count, std::uint64_t seed) {
  SplitMix rng(seed);
  Scene raw;
  raw.splats.reserve(count);
  std::size_t vase = count - count / 4;
  double s = 0.035 * std::sqrt(1000.0 / std::max<std::size_t>(count, 1));
  for (std::size_t k = 0; k < count; ++k) {
    GaussianSplat g;
    g.rotation = random_rotation(rng);
    if (k < vase) {
      double z = rng.uniform(0.0, 0.8);
      double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
      double r = vase_radius(z);
      g.position = {r * std::cos(phi), r * std::sin(phi), z};
      double shade = rng.uniform(-0.05, 0.05);
      g.sh_dc = rgb_to_dc({0.72 + shade, 0.36 + shade, 0.22 + 0.5 * shade});
      g.opacity = 1.0;
      g.scale = {s * rng.uniform(0.8, 1.3), s * rng.uniform(0.8, 1.3), s * rng.uniform(0.4, 0.8)};
    } else {
      double r = 1.2 * std::sqrt(rng.uniform());
      double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
      g.position = {r * std::cos(phi), r * std::sin(phi), -0.02 + rng.uniform(-0.005, 0.005)};
      double shade = rng.uniform(-0.04, 0.04);
      g.sh_dc = rgb_to_dc({0.45 + shade, 0.50 + shade, 0.40 + shade});
      g.opacity = 0.9;
      g.scale = {3.0 * s * rng.uniform(0.8, 1.2), 3.0 * s * rng.uniform(0.8, 1.2), 0.3 * s};
    }
    raw.splats.push_back(g);
  }
  std::vector<std::uint32_t> idx(vase);
  for (std::size_t k = 0; k < vase; ++k) idx[k] = static_cast<std::uint32_t>(k);
  Scene scene = canonical(std::move(raw));
  SelectionMask mask(std::move(idx), scene.size());
  return {std::move(scene), std::move(mask)};
}

Scene make_random_scene(std::size_t count, std::uint64_t seed, bool with_sh_rest, double extent) {
  SplitMix rng(seed);
  Scene scene;
  scene.splats.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    GaussianSplat g;
    g.position = {rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                  rng.uniform(-extent, extent)};
    g.rotation = random_rotation(rng);
    g.scale = {std::exp(rng.uniform(-5.0, -1.0)), std::exp(rng.uniform(-5.0, -1.0)),
               std::exp(rng.uniform(-5.0, -1.0))};
    g.sh_dc = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    g.opacity = rng.uniform(0.01, 0.99);
    scene.splats.push_back(g);
  }
  if (with_sh_rest) {
    scene.sh_rest.resize(count * kShRestCount);
    for (float& f : scene.sh_rest) f = static_cast<float>(rng.uniform(-0.5, 0.5));
  }
  return scene;
}

}  // namespace pvfx
