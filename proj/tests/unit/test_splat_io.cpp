#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "oracles.hpp"
#include "promptvfx/error.hpp"
#include "promptvfx/splat_io.hpp"
#include "promptvfx/synthetic.hpp"

using namespace pvfx;
using pvfx::testkit::TempDir;

namespace {

void expect_near(Vec3 a, Vec3 b, double tol) {
  EXPECT_NEAR(a.x, b.x, tol);
  EXPECT_NEAR(a.y, b.y, tol);
  EXPECT_NEAR(a.z, b.z, tol);
}

// A hand-built PLY with float properties in a non-standard order plus an
// unrelated double property.
std::vector<std::uint8_t> custom_ply(float opacity_logit, float rot0) {
  std::string header =
      "ply\nformat binary_little_endian 1.0\ncomment hand made\nelement vertex 1\n"
      "property float opacity\nproperty double extra\n"
      "property float rot_0\nproperty float rot_1\nproperty float rot_2\nproperty float rot_3\n"
      "property float scale_0\nproperty float scale_1\nproperty float scale_2\n"
      "property float f_dc_0\nproperty float f_dc_1\nproperty float f_dc_2\n"
      "property float x\nproperty float y\nproperty float z\nend_header\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  auto f = [&](float v) {
    std::uint8_t b[4];
    std::memcpy(b, &v, 4);
    out.insert(out.end(), b, b + 4);
  };
  f(opacity_logit);
  double extra = 42.0;
  std::uint8_t b[8];
  std::memcpy(b, &extra, 8);
  out.insert(out.end(), b, b + 8);
  for (float v : {rot0, 0.0f, 0.0f, 0.0f, std::log(0.5f), std::log(0.25f), 0.0f, 1.0f, 0.0f, -1.0f,
                  1.0f, 2.0f, 3.0f})
    f(v);
  return out;
}

}  // namespace

TEST(SplatIo, RoundTripPreservesAttributes) {
  Scene scene = make_random_scene(64, 3, true);
  TempDir dir("splat");
  save_scene(scene, dir / "s.ply");
  Scene back = load_scene(dir / "s.ply");
  ASSERT_EQ(back.size(), scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const auto& a = scene.splats[i];
    const auto& b = back.splats[i];
    expect_near(a.position, b.position, 1e-6);
    expect_near(a.scale, b.scale, 1e-6);
    expect_near(a.sh_dc, b.sh_dc, 1e-6);
    EXPECT_NEAR(a.opacity, b.opacity, 1e-6);
    EXPECT_NEAR(a.rotation.w, b.rotation.w, 1e-6);
    EXPECT_NEAR(a.rotation.z, b.rotation.z, 1e-6);
  }
  EXPECT_EQ(back.sh_rest, scene.sh_rest);
}

TEST(SplatIo, DecodeIsCanonical) {
  auto bytes = custom_ply(0.0f, 2.0f);
  Scene s = decode_scene(bytes);
  ASSERT_EQ(s.size(), 1u);
  const auto& g = s.splats[0];
  EXPECT_DOUBLE_EQ(g.opacity, 0.5);
  EXPECT_NEAR(g.scale.x, 0.5, 1e-7);
  EXPECT_NEAR(g.scale.y, 0.25, 1e-7);
  EXPECT_NEAR(g.scale.z, 1.0, 1e-7);
  EXPECT_DOUBLE_EQ(norm(g.rotation), 1.0);
  EXPECT_EQ(g.position, (Vec3{1, 2, 3}));
  EXPECT_FALSE(s.has_sh_rest());
}

TEST(SplatIo, ExtremeOpacityIsCappedOnWrite) {
  Scene s;
  s.splats.resize(2);
  s.splats[0].opacity = 1.0;
  s.splats[1].opacity = 0.0;
  Scene back = decode_scene(encode_scene(s));
  EXPECT_NEAR(back.splats[0].opacity, sigmoid(kOpacityLogitCap), 1e-9);
  EXPECT_NEAR(back.splats[1].opacity, sigmoid(-kOpacityLogitCap), 1e-9);
  EXPECT_LT(1.0 - back.splats[0].opacity, 1e-6);
}

TEST(SplatIo, MissingPropertyNamesField) {
  std::string ply =
      "ply\nformat binary_little_endian 1.0\nelement vertex 0\nproperty float x\nproperty float y\n"
      "property float z\nend_header\n";
  try {
    decode_scene(std::vector<std::uint8_t>(ply.begin(), ply.end()));
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.field(), "f_dc_0");
  }
}

TEST(SplatIo, RejectsAsciiAndGarbage) {
  std::string ascii = "ply\nformat ascii 1.0\nelement vertex 0\nend_header\n";
  EXPECT_THROW(decode_scene(std::vector<std::uint8_t>(ascii.begin(), ascii.end())), FormatError);
  std::string junk = "not a ply at all";
  EXPECT_THROW(decode_scene(std::vector<std::uint8_t>(junk.begin(), junk.end())), FormatError);
}

TEST(SplatIo, TruncatedBodyIsFormatError) {
  auto bytes = encode_scene(make_random_scene(4, 1));
  bytes.resize(bytes.size() - 5);
  EXPECT_THROW(decode_scene(bytes), FormatError);
}

TEST(SplatIo, NonFiniteValueNamesSplat) {
  auto bytes = custom_ply(std::nanf(""), 1.0f);
  try {
    decode_scene(bytes);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.index(), 0u);
  }
}

TEST(SplatIo, ZeroRotationIsDataError) {
  EXPECT_THROW(decode_scene(custom_ply(0.0f, 0.0f)), DataError);
}

TEST(SplatIo, MissingFileIsIoError) {
  EXPECT_THROW(load_scene("/nonexistent/dir/scene.ply"), IoError);
}

TEST(SplatIo, ColorConversionsInvert) {
  Vec3 rgb{0.1, 0.5, 0.9};
  expect_near(dc_to_rgb(rgb_to_dc(rgb)), rgb, 1e-12);
  expect_near(dc_to_rgb({100, -100, 0}), {1, 0, 0.5}, 0);
  EXPECT_NEAR(clamped_logit(sigmoid(2.5)), 2.5, 1e-12);
  EXPECT_DOUBLE_EQ(clamped_logit(1.0), kOpacityLogitCap);
  EXPECT_DOUBLE_EQ(clamped_logit(0.0), -kOpacityLogitCap);
}

TEST(Mask, ParsesSortsAndDeduplicates) {
  Scene s = make_random_scene(10, 1);
  auto m = parse_mask("  3\n1\n\n3\n9 \n", s);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m.indices()[0], 1u);
  EXPECT_EQ(m.indices()[2], 9u);
  EXPECT_TRUE(m.contains(3));
  EXPECT_FALSE(m.contains(4));
  EXPECT_EQ(parse_mask(format_mask(m), s), m);
}

TEST(Mask, OutOfRangeReportsValue) {
  Scene s = make_random_scene(10, 1);
  try {
    parse_mask("1\n10\n", s);
    FAIL();
  } catch (const MaskError& e) {
    EXPECT_EQ(e.value(), 10);
  }
  try {
    parse_mask("-2\n", s);
    FAIL();
  } catch (const MaskError& e) {
    EXPECT_EQ(e.value(), -2);
  }
  EXPECT_THROW(parse_mask("1.5\n", s), FormatError);
  EXPECT_THROW(SelectionMask({0, 11}, 10), MaskError);
}

TEST(Mask, EmptySelectionIsAllowedButHasNoBounds) {
  Scene s = make_random_scene(5, 1);
  auto m = parse_mask("", s);
  EXPECT_TRUE(m.empty());
  EXPECT_THROW(bounds(s, m), EmptySelectionError);
  EXPECT_THROW(centroid(s, m), EmptySelectionError);
}

TEST(Mask, BoundsAndCentroid) {
  Scene s;
  s.splats.resize(3);
  s.splats[0].position = {0, 0, 0};
  s.splats[1].position = {2, -1, 4};
  s.splats[2].position = {100, 100, 100};
  SelectionMask m({0, 1}, 3);
  Aabb b = bounds(s, m);
  EXPECT_EQ(b.min, (Vec3{0, -1, 0}));
  EXPECT_EQ(b.max, (Vec3{2, 0, 4}));
  EXPECT_EQ(centroid(s, m), (Vec3{1, -0.5, 2}));
}

TEST(Synthetic, VaseSceneRoundTripsExactly) {
  auto v = make_vase_scene(400);
  EXPECT_EQ(v.scene.size(), 400u);
  EXPECT_EQ(v.mask.size(), 300u);
  Scene back = decode_scene(encode_scene(v.scene));
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back.splats[i].position, v.scene.splats[i].position);
    EXPECT_EQ(back.splats[i].opacity, v.scene.splats[i].opacity);
  }
  EXPECT_EQ(make_vase_scene(400).scene.splats[17].position, v.scene.splats[17].position);
}
