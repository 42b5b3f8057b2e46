#pragma once

#include <cstdint>

#include "promptvfx/splat_io.hpp"

namespace pvfx {

// Small deterministic generator (splitmix64 stream) shared by the fixture
// tool, tests and benchmarks so they all see identical scenes.
class SplitMix {
 public:
  explicit SplitMix(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

 private:
  std::uint64_t state_;
};

struct SyntheticScene {
  Scene scene;
  SelectionMask mask;
};

// A terracotta vase standing on a ground disc. Three quarters of the splats
// belong to the vase (selected by the mask, opacity 1), the rest to the
// disc. Attributes are already in their canonical on-disk precision, so
// save/load reproduces the scene exactly.
SyntheticScene make_vase_scene(std::size_t count, std::uint64_t seed = 7);

// Uniformly random splats inside [-extent, extent]^3.
Scene make_random_scene(std::size_t count, std::uint64_t seed, bool with_sh_rest = false,
                        double extent = 1.0);

}  // namespace pvfx
