#pragma once

#include <cmath>
#include <cstdint>

// Deterministic hashing and value noise behind the DSL's hash() and
// noise3(). Constants are frozen by golden tests; changing anything here
// invalidates recorded fixtures.
namespace pvfx::field {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// floor(v) as a lattice coordinate, saturated to +-2^62; NaN maps to 0.
inline std::int64_t lattice_coord(double v) {
  constexpr double kLimit = 4611686018427387904.0;  // 2^62
  if (std::isnan(v)) return 0;
  double f = std::floor(v);
  if (f >= kLimit) return static_cast<std::int64_t>(kLimit);
  if (f <= -kLimit) return -static_cast<std::int64_t>(kLimit);
  return static_cast<std::int64_t>(f);
}

constexpr double unit_interval(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Uniform in [0, 1).
inline double hash01(std::uint64_t seed, double i, double k) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(lattice_coord(i)));
  h = splitmix64(h ^ static_cast<std::uint64_t>(lattice_coord(k)));
  return unit_interval(h);
}

inline double lattice_value(std::uint64_t seed, std::int64_t x, std::int64_t y, std::int64_t z) {
  std::uint64_t h = splitmix64(seed ^ 0x6A09E667F3BCC909ull);
  h = splitmix64(h ^ static_cast<std::uint64_t>(x));
  h = splitmix64(h ^ static_cast<std::uint64_t>(y));
  h = splitmix64(h ^ static_cast<std::uint64_t>(z));
  return 2.0 * unit_interval(h) - 1.0;
}

// Trilinear value noise over the integer lattice, in [-1, 1].
inline double value_noise3(std::uint64_t seed, double x, double y, double z) {
  std::int64_t ix = lattice_coord(x), iy = lattice_coord(y), iz = lattice_coord(z);
  auto frac = [](double v) {
    double f = v - std::floor(v);
    return std::isfinite(f) ? f : 0.0;
  };
  double fx = frac(x), fy = frac(y), fz = frac(z);
  double c[2][2][2];
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int d = 0; d < 2; ++d) c[a][b][d] = lattice_value(seed, ix + a, iy + b, iz + d);
  auto lerp = [](double p, double q, double w) { return p * (1.0 - w) + q * w; };
  double x00 = lerp(c[0][0][0], c[1][0][0], fx);
  double x10 = lerp(c[0][1][0], c[1][1][0], fx);
  double x01 = lerp(c[0][0][1], c[1][0][1], fx);
  double x11 = lerp(c[0][1][1], c[1][1][1], fx);
  double y0 = lerp(x00, x10, fy);
  double y1 = lerp(x01, x11, fy);
  return lerp(y0, y1, fz);
}

}  // namespace pvfx::field
