#include "promptvfx/splat_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "promptvfx/error.hpp"
#include "promptvfx/log.hpp"

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace pvfx {
namespace {

enum class ScalarType { i8, u8, i16, u16, i32, u32, f32, f64 };

struct Property {
  std::string name;
  ScalarType type;
  std::size_t offset;
};

std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::i8:
    case ScalarType::u8: return 1;
    case ScalarType::i16:
    case ScalarType::u16: return 2;
    case ScalarType::i32:
    case ScalarType::u32:
    case ScalarType::f32: return 4;
    case ScalarType::f64: return 8;
  }
  return 0;
}

bool parse_type(const std::string& s, ScalarType& out) {
  static const std::map<std::string, ScalarType> table = {
      {"char", ScalarType::i8},    {"int8", ScalarType::i8},     {"uchar", ScalarType::u8},
      {"uint8", ScalarType::u8},   {"short", ScalarType::i16},   {"int16", ScalarType::i16},
      {"ushort", ScalarType::u16}, {"uint16", ScalarType::u16},  {"int", ScalarType::i32},
      {"int32", ScalarType::i32},  {"uint", ScalarType::u32},    {"uint32", ScalarType::u32},
      {"float", ScalarType::f32},  {"float32", ScalarType::f32}, {"double", ScalarType::f64},
      {"float64", ScalarType::f64}};
  auto it = table.find(s);
  if (it == table.end()) return false;
  out = it->second;
  return true;
}

template <class T>
T load_le(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double read_scalar(const std::uint8_t* p, ScalarType t) {
  switch (t) {
    case ScalarType::i8: return load_le<std::int8_t>(p);
    case ScalarType::u8: return load_le<std::uint8_t>(p);
    case ScalarType::i16: return load_le<std::int16_t>(p);
    case ScalarType::u16: return load_le<std::uint16_t>(p);
    case ScalarType::i32: return load_le<std::int32_t>(p);
    case ScalarType::u32: return load_le<std::uint32_t>(p);
    case ScalarType::f32: return load_le<float>(p);
    case ScalarType::f64: return load_le<double>(p);
  }
  return 0.0;
}

struct Header {
  std::size_t vertex_count = 0;
  std::vector<Property> properties;
  std::size_t stride = 0;
  std::size_t data_offset = 0;
};

Header parse_header(std::span<const std::uint8_t> bytes) {
  static constexpr std::string_view kEnd = "end_header\n";
  std::string_view view(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  if (!view.starts_with("ply\n")) throw FormatError("magic", "not a ply file");
  auto end = view.find(kEnd);
  if (end == std::string_view::npos) throw FormatError("end_header");

  Header h;
  h.data_offset = end + kEnd.size();
  std::istringstream lines(std::string(view.substr(4, end - 4)));
  std::string line;
  bool in_vertex = false, seen_vertex = false, seen_format = false;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream words(line);
    std::string keyword;
    words >> keyword;
    if (keyword.empty() || keyword == "comment" || keyword == "obj_info") continue;
    if (keyword == "format") {
      std::string fmt;
      words >> fmt;
      if (fmt != "binary_little_endian") throw FormatError("format", "unsupported encoding " + fmt);
      seen_format = true;
    } else if (keyword == "element") {
      std::string name;
      long long count = -1;
      words >> name >> count;
      if (name == "vertex") {
        if (seen_vertex || count < 0) throw FormatError("element vertex");
        h.vertex_count = static_cast<std::size_t>(count);
        in_vertex = seen_vertex = true;
      } else {
        if (!seen_vertex) throw FormatError("element vertex", "vertex must be the first element");
        in_vertex = false;
      }
    } else if (keyword == "property") {
      if (!in_vertex) continue;
      std::string type, name;
      words >> type;
      if (type == "list") throw FormatError("property", "list properties are not supported");
      words >> name;
      ScalarType st;
      if (!parse_type(type, st)) throw FormatError(name, "unknown type " + type);
      h.properties.push_back({name, st, h.stride});
      h.stride += type_size(st);
    } else {
      throw FormatError(keyword, "unknown header keyword");
    }
  }
  if (!seen_format) throw FormatError("format");
  if (!seen_vertex) throw FormatError("element vertex");
  return h;
}

const Property& require(const Header& h, const std::string& name) {
  for (const auto& p : h.properties)
    if (p.name == name) return p;
  throw FormatError(name);
}

const Property* find(const Header& h, const std::string& name) {
  for (const auto& p : h.properties)
    if (p.name == name) return &p;
  return nullptr;
}

void append_f32(std::vector<std::uint8_t>& out, double v) {
  float f = static_cast<float>(v);
  auto* p = reinterpret_cast<const std::uint8_t*>(&f);
  out.insert(out.end(), p, p + 4);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

}  // namespace

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double clamped_logit(double p) {
  if (p <= 0.0) return -kOpacityLogitCap;
  if (p >= 1.0) return kOpacityLogitCap;
  return std::clamp(std::log(p / (1.0 - p)), -kOpacityLogitCap, kOpacityLogitCap);
}

Vec3 dc_to_rgb(Vec3 dc) {
  auto f = [](double c) { return std::clamp(0.5 + kShC0 * c, 0.0, 1.0); };
  return {f(dc.x), f(dc.y), f(dc.z)};
}

Vec3 rgb_to_dc(Vec3 rgb) { return (rgb - Vec3{0.5, 0.5, 0.5}) / kShC0; }

// ---------------------------------------------------------------------------

SelectionMask::SelectionMask(std::vector<std::uint32_t> indices, std::size_t scene_size)
    : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
  if (!indices_.empty() && indices_.back() >= scene_size)
    throw MaskError(indices_.back(), "index out of range for scene of " +
                                         std::to_string(scene_size) + " splats");
}

SelectionMask SelectionMask::all(std::size_t scene_size) {
  std::vector<std::uint32_t> idx(scene_size);
  for (std::size_t i = 0; i < scene_size; ++i) idx[i] = static_cast<std::uint32_t>(i);
  return SelectionMask(std::move(idx), scene_size);
}

bool SelectionMask::contains(std::uint32_t index) const {
  return std::binary_search(indices_.begin(), indices_.end(), index);
}

// ---------------------------------------------------------------------------

Scene decode_scene(std::span<const std::uint8_t> bytes, std::string source_path) {
  Header h = parse_header(bytes);

  const Property& x = require(h, "x");
  const Property& y = require(h, "y");
  const Property& z = require(h, "z");
  const Property* dc[3] = {&require(h, "f_dc_0"), &require(h, "f_dc_1"), &require(h, "f_dc_2")};
  const Property& opacity = require(h, "opacity");
  const Property* sc[3] = {&require(h, "scale_0"), &require(h, "scale_1"), &require(h, "scale_2")};
  const Property* rot[4] = {&require(h, "rot_0"), &require(h, "rot_1"), &require(h, "rot_2"),
                            &require(h, "rot_3")};

  std::vector<const Property*> rest;
  if (find(h, "f_rest_0")) {
    for (int k = 0; k < kShRestCount; ++k)
      rest.push_back(&require(h, "f_rest_" + std::to_string(k)));
  }

  if (h.stride == 0 && h.vertex_count > 0) throw FormatError("property", "no vertex properties");
  std::size_t needed = h.data_offset + h.vertex_count * h.stride;
  if (bytes.size() < needed)
    throw FormatError("vertex", "truncated: expected " + std::to_string(needed) + " bytes, got " +
                                    std::to_string(bytes.size()));

  Scene scene;
  scene.source_path = std::move(source_path);
  scene.splats.resize(h.vertex_count);
  if (!rest.empty()) scene.sh_rest.resize(h.vertex_count * kShRestCount);

  for (std::size_t i = 0; i < h.vertex_count; ++i) {
    const std::uint8_t* row = bytes.data() + h.data_offset + i * h.stride;
    auto get = [&](const Property& p) {
      double v = read_scalar(row + p.offset, p.type);
      if (!std::isfinite(v)) throw DataError(i, "non-finite " + p.name);
      return v;
    };
    GaussianSplat& s = scene.splats[i];
    s.position = {get(x), get(y), get(z)};
    s.sh_dc = {get(*dc[0]), get(*dc[1]), get(*dc[2])};
    s.opacity = sigmoid(get(opacity));
    s.scale = {std::exp(get(*sc[0])), std::exp(get(*sc[1])), std::exp(get(*sc[2]))};
    Quat q{get(*rot[0]), get(*rot[1]), get(*rot[2]), get(*rot[3])};
    double qn = norm(q);
    if (!(qn > 0.0)) throw DataError(i, "zero-norm rotation");
    s.rotation = {q.w / qn, q.x / qn, q.y / qn, q.z / qn};
    if (!(s.scale.x > 0.0 && s.scale.y > 0.0 && s.scale.z > 0.0) || !all_finite(s.scale))
      throw DataError(i, "scale underflow/overflow");
    for (std::size_t k = 0; k < rest.size(); ++k) {
      const Property& p = *rest[k];
      float v = p.type == ScalarType::f32 ? load_le<float>(row + p.offset)
                                          : static_cast<float>(read_scalar(row + p.offset, p.type));
      if (!std::isfinite(v)) throw DataError(i, "non-finite " + p.name);
      scene.sh_rest[i * kShRestCount + k] = v;
    }
  }
  return scene;
}

std::vector<std::uint8_t> encode_scene(const Scene& scene) {
  const bool rest = scene.has_sh_rest();
  std::ostringstream hdr;
  hdr << "ply\nformat binary_little_endian 1.0\nelement vertex " << scene.size() << "\n";
  for (const char* n : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"})
    hdr << "property float " << n << "\n";
  if (rest)
    for (int k = 0; k < kShRestCount; ++k) hdr << "property float f_rest_" << k << "\n";
  for (const char* n : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2",
                        "rot_3"})
    hdr << "property float " << n << "\n";
  hdr << "end_header\n";

  std::string header = hdr.str();
  const std::size_t stride = 4 * (17 + (rest ? kShRestCount : 0));
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + stride * scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const GaussianSplat& s = scene.splats[i];
    for (double v : {s.position.x, s.position.y, s.position.z, 0.0, 0.0, 0.0, s.sh_dc.x, s.sh_dc.y,
                     s.sh_dc.z})
      append_f32(out, v);
    if (rest) {
      auto* p = reinterpret_cast<const std::uint8_t*>(&scene.sh_rest[i * kShRestCount]);
      out.insert(out.end(), p, p + 4 * kShRestCount);
    }
    append_f32(out, clamped_logit(s.opacity));
    for (double v : {s.scale.x, s.scale.y, s.scale.z}) append_f32(out, std::log(v));
    for (double v : {s.rotation.w, s.rotation.x, s.rotation.y, s.rotation.z}) append_f32(out, v);
  }
  return out;
}

Scene load_scene(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return decode_scene(bytes, path.string());
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
  auto bytes = encode_scene(scene);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------

SelectionMask parse_mask(std::string_view text, const Scene& scene) {
  std::vector<std::uint32_t> indices;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front())))
      line.remove_prefix(1);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
      line.remove_suffix(1);
    if (line.empty()) continue;
    long long value = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), value);
    if (ec != std::errc() || ptr != line.data() + line.size())
      throw FormatError("mask", "line " + std::to_string(line_no) + " is not an integer");
    if (value < 0 || static_cast<unsigned long long>(value) >= scene.size())
      throw MaskError(value, "index out of range for scene of " + std::to_string(scene.size()) +
                                 " splats");
    indices.push_back(static_cast<std::uint32_t>(value));
  }
  if (indices.empty()) log::warn("selection mask is empty; nothing will be animated");
  return SelectionMask(std::move(indices), scene.size());
}

SelectionMask load_mask(const std::filesystem::path& path, const Scene& scene) {
  auto bytes = read_file(path);
  return parse_mask(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                    scene);
}

std::string format_mask(const SelectionMask& mask) {
  std::string out;
  for (auto i : mask.indices()) {
    out += std::to_string(i);
    out += '\n';
  }
  return out;
}

Aabb bounds(const Scene& scene, const SelectionMask& mask) {
  if (mask.empty()) throw EmptySelectionError();
  Aabb box{scene.splats[mask.indices()[0]].position, scene.splats[mask.indices()[0]].position};
  for (auto i : mask.indices()) {
    box.min = cwise_min(box.min, scene.splats[i].position);
    box.max = cwise_max(box.max, scene.splats[i].position);
  }
  return box;
}

Vec3 centroid(const Scene& scene, const SelectionMask& mask) {
  if (mask.empty()) throw EmptySelectionError();
  Vec3 sum;
  for (auto i : mask.indices()) sum = sum + scene.splats[i].position;
  return sum / static_cast<double>(mask.size());
}

}  // namespace pvfx
