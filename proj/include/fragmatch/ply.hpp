#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fragmatch/geometry.hpp"

namespace fragmatch {

/// Malformed or unsupported point-cloud file. The message carries the path
/// and a line number (header and ASCII body) or byte offset (binary body).
class PlyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PlyFormat { ascii, binary };
enum class PlyScalar { f32, f64 };

using Rgb = std::array<std::uint8_t, 3>;

struct PlyData {
  PointCloud cloud;
  std::optional<std::vector<Rgb>> colors;  // present when red/green/blue exist
};

namespace ply_detail {

enum class Type { i8, u8, i16, u16, i32, u32, f32, f64 };

inline std::optional<Type> parse_type(std::string_view s) {
  if (s == "char" || s == "int8") return Type::i8;
  if (s == "uchar" || s == "uint8") return Type::u8;
  if (s == "short" || s == "int16") return Type::i16;
  if (s == "ushort" || s == "uint16") return Type::u16;
  if (s == "int" || s == "int32") return Type::i32;
  if (s == "uint" || s == "uint32") return Type::u32;
  if (s == "float" || s == "float32") return Type::f32;
  if (s == "double" || s == "float64") return Type::f64;
  return std::nullopt;
}

inline std::size_t type_size(Type t) {
  switch (t) {
    case Type::i8: case Type::u8: return 1;
    case Type::i16: case Type::u16: return 2;
    case Type::i32: case Type::u32: case Type::f32: return 4;
    case Type::f64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  Type type = Type::f32;
  bool is_list = false;
  Type count_type = Type::u8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> props;
};

template <class T>
T load_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <class T>
void store_le(std::string& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) std::reverse(b, b + sizeof(T));
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

inline double load_binary(Type t, const unsigned char* p) {
  switch (t) {
    case Type::i8: return load_le<std::int8_t>(p);
    case Type::u8: return load_le<std::uint8_t>(p);
    case Type::i16: return load_le<std::int16_t>(p);
    case Type::u16: return load_le<std::uint16_t>(p);
    case Type::i32: return load_le<std::int32_t>(p);
    case Type::u32: return load_le<std::uint32_t>(p);
    case Type::f32: return load_le<float>(p);
    case Type::f64: return load_le<double>(p);
  }
  return 0.0;
}

inline std::string fmt(double v, int digits) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, digits);
  return std::string(buf, res.ptr);
}

inline std::string read_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw PlyError(path + ": no such file");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PlyError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t b = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > b) out.push_back(line.substr(b, i - b));
  }
  return out;
}

inline PlyData read_obj(const std::string& path, const std::string& bytes) {
  PlyData d;
  d.cloud.source_id = path;
  std::size_t line_no = 0, pos = 0;
  while (pos < bytes.size()) {
    std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos) eol = bytes.size();
    ++line_no;
    const auto tok = split_ws(std::string_view(bytes).substr(pos, eol - pos));
    pos = eol + 1;
    if (tok.empty() || tok[0] != "v") continue;
    if (tok.size() < 4) throw PlyError(path + ": line " + std::to_string(line_no) + ": vertex needs 3 coordinates");
    Point3 p;
    for (int a = 0; a < 3; ++a) {
      const auto s = tok[static_cast<std::size_t>(a) + 1];
      auto res = std::from_chars(s.data(), s.data() + s.size(), p[a]);
      if (res.ec != std::errc{}) throw PlyError(path + ": line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
    }
    d.cloud.points.push_back(p);
  }
  if (d.cloud.points.empty()) throw PlyError(path + ": empty cloud");
  return d;
}

}  // namespace ply_detail

/// Reads vertex positions (and red/green/blue when present) from an ASCII or
/// binary-little-endian PLY file, or the `v` lines of an OBJ file. Other
/// properties and elements are skipped.
inline PlyData read_ply(const std::string& path) {
  using namespace ply_detail;
  const std::string bytes = read_file(path);
  {
    auto ext = std::filesystem::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".obj") return read_obj(path, bytes);
  }
  const auto fail = [&](const std::string& where, const std::string& what) -> PlyError {
    return PlyError(path + ": " + where + ": " + what);
  };

  std::size_t pos = 0, line_no = 0;
  const auto next_line = [&]() -> std::optional<std::string_view> {
    if (pos >= bytes.size()) return std::nullopt;
    std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos) eol = bytes.size();
    std::string_view line(bytes.data() + pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;
    ++line_no;
    return line;
  };
  const auto at_line = [&] { return "line " + std::to_string(line_no); };

  auto first = next_line();
  if (!first || *first != "ply") throw fail("line 1", "malformed header: missing 'ply' magic");

  bool binary = false, have_format = false;
  std::vector<Element> elements;
  for (;;) {
    auto line = next_line();
    if (!line) throw fail(at_line(), "malformed header: missing end_header");
    const auto tok = split_ws(*line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() != 3) throw fail(at_line(), "malformed header: bad format line");
      if (tok[2] != "1.0") throw fail(at_line(), "unsupported format version " + std::string(tok[2]));
      if (tok[1] == "ascii") binary = false;
      else if (tok[1] == "binary_little_endian") binary = true;
      else throw fail(at_line(), "unsupported format " + std::string(tok[1]));
      have_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw fail(at_line(), "malformed header: bad element line");
      Element e;
      e.name = tok[1];
      auto res = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), e.count);
      if (res.ec != std::errc{}) throw fail(at_line(), "malformed header: bad element count");
      elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (elements.empty()) throw fail(at_line(), "malformed header: property before element");
      Property p;
      if (tok.size() == 5 && tok[1] == "list") {
        auto ct = parse_type(tok[2]);
        auto it = parse_type(tok[3]);
        if (!ct || !it) throw fail(at_line(), "malformed header: unknown list type");
        p.is_list = true;
        p.count_type = *ct;
        p.type = *it;
        p.name = tok[4];
      } else if (tok.size() == 3) {
        auto t = parse_type(tok[1]);
        if (!t) throw fail(at_line(), "malformed header: unknown property type " + std::string(tok[1]));
        p.type = *t;
        p.name = tok[2];
      } else {
        throw fail(at_line(), "malformed header: bad property line");
      }
      elements.back().props.push_back(std::move(p));
    } else {
      throw fail(at_line(), "malformed header: unknown keyword " + std::string(tok[0]));
    }
  }
  if (!have_format) throw fail(at_line(), "malformed header: missing format line");

  const auto vit = std::find_if(elements.begin(), elements.end(), [](const Element& e) { return e.name == "vertex"; });
  if (vit == elements.end()) throw fail(at_line(), "malformed header: no vertex element");
  int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
  for (std::size_t i = 0; i < vit->props.size(); ++i) {
    const auto& p = vit->props[i];
    if (p.is_list) continue;
    const int ii = static_cast<int>(i);
    if (p.name == "x") ix = ii;
    else if (p.name == "y") iy = ii;
    else if (p.name == "z") iz = ii;
    else if (p.name == "red" || p.name == "r") ir = ii;
    else if (p.name == "green" || p.name == "g") ig = ii;
    else if (p.name == "blue" || p.name == "b") ib = ii;
  }
  if (ix < 0 || iy < 0 || iz < 0) throw fail(at_line(), "malformed header: vertex element lacks x, y, z");
  if (vit->count == 0) throw PlyError(path + ": empty cloud");
  const bool with_color = ir >= 0 && ig >= 0 && ib >= 0;

  PlyData d;
  d.cloud.source_id = path;
  d.cloud.points.reserve(vit->count);
  if (with_color) d.colors.emplace().reserve(vit->count);
  std::vector<double> row;

  if (binary) {
    const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
    const auto need = [&](std::size_t n, const Element& e, std::size_t inst) {
      if (pos + n > bytes.size())
        throw fail("byte offset " + std::to_string(pos),
                   e.name + " count mismatch: data ends in instance " + std::to_string(inst) + " of " +
                       std::to_string(e.count));
    };
    for (const auto& e : elements) {
      const bool is_vertex = &e == &*vit;
      for (std::size_t inst = 0; inst < e.count; ++inst) {
        row.assign(e.props.size(), 0.0);
        for (std::size_t pi = 0; pi < e.props.size(); ++pi) {
          const auto& p = e.props[pi];
          if (p.is_list) {
            need(type_size(p.count_type), e, inst);
            const double cnt = load_binary(p.count_type, data + pos);
            pos += type_size(p.count_type);
            if (cnt < 0) throw fail("byte offset " + std::to_string(pos), "negative list length");
            const std::size_t skip = static_cast<std::size_t>(cnt) * type_size(p.type);
            need(skip, e, inst);
            pos += skip;
          } else {
            need(type_size(p.type), e, inst);
            row[pi] = load_binary(p.type, data + pos);
            pos += type_size(p.type);
          }
        }
        if (is_vertex) {
          d.cloud.points.emplace_back(row[static_cast<std::size_t>(ix)], row[static_cast<std::size_t>(iy)],
                                      row[static_cast<std::size_t>(iz)]);
          if (with_color)
            d.colors->push_back({static_cast<std::uint8_t>(row[static_cast<std::size_t>(ir)]),
                                 static_cast<std::uint8_t>(row[static_cast<std::size_t>(ig)]),
                                 static_cast<std::uint8_t>(row[static_cast<std::size_t>(ib)])});
        }
      }
      if (is_vertex) break;  // nothing after the vertices is needed
    }
  } else {
    // ASCII: whitespace-separated tokens; track lines for diagnostics.
    std::vector<std::string_view> tokens;
    std::size_t tok_i = 0;
    const auto next_token = [&](const Element& e, std::size_t inst) -> std::string_view {
      while (tok_i >= tokens.size()) {
        auto line = next_line();
        if (!line)
          throw fail(at_line(), e.name + " count mismatch: file ends in instance " + std::to_string(inst) + " of " +
                                    std::to_string(e.count));
        tokens = split_ws(*line);
        tok_i = 0;
      }
      return tokens[tok_i++];
    };
    const auto parse_num = [&](std::string_view s) {
      double v = 0.0;
      auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw fail(at_line(), "bad number '" + std::string(s) + "'");
      return v;
    };
    for (const auto& e : elements) {
      const bool is_vertex = &e == &*vit;
      for (std::size_t inst = 0; inst < e.count; ++inst) {
        row.assign(e.props.size(), 0.0);
        for (std::size_t pi = 0; pi < e.props.size(); ++pi) {
          const auto& p = e.props[pi];
          if (p.is_list) {
            const double cnt = parse_num(next_token(e, inst));
            for (std::size_t s = 0; s < static_cast<std::size_t>(std::max(0.0, cnt)); ++s) next_token(e, inst);
          } else {
            row[pi] = parse_num(next_token(e, inst));
          }
        }
        if (is_vertex) {
          d.cloud.points.emplace_back(row[static_cast<std::size_t>(ix)], row[static_cast<std::size_t>(iy)],
                                      row[static_cast<std::size_t>(iz)]);
          if (with_color)
            d.colors->push_back({static_cast<std::uint8_t>(row[static_cast<std::size_t>(ir)]),
                                 static_cast<std::uint8_t>(row[static_cast<std::size_t>(ig)]),
                                 static_cast<std::uint8_t>(row[static_cast<std::size_t>(ib)])});
        }
      }
      if (is_vertex) break;
    }
  }
  for (std::size_t i = 0; i < d.cloud.size(); ++i)
    if (!is_finite(d.cloud[i])) throw fail("vertex " + std::to_string(i), "non-finite coordinate");
  return d;
}

inline PointCloud read_point_cloud(const std::string& path) { return read_ply(path).cloud; }

namespace ply_detail {

inline std::string encode(const PointCloud& c, PlyFormat format, PlyScalar scalar,
                          const std::vector<Rgb>* colors) {
  if (c.empty()) throw std::invalid_argument("refusing to write an empty cloud");
  const char* tname = scalar == PlyScalar::f64 ? "double" : "float";
  std::string out = "ply\n";
  out += format == PlyFormat::binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n";
  if (!c.source_id.empty() && c.source_id.find('\n') == std::string::npos) out += "comment source " + c.source_id + "\n";
  out += "element vertex " + std::to_string(c.size()) + "\n";
  for (const char* axis : {"x", "y", "z"}) out += std::string("property ") + tname + " " + axis + "\n";
  if (colors) out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Point3& p = c[i];
    if (format == PlyFormat::binary) {
      for (int a = 0; a < 3; ++a) {
        if (scalar == PlyScalar::f64) store_le<double>(out, p[a]);
        else store_le<float>(out, static_cast<float>(p[a]));
      }
      if (colors)
        for (auto ch : (*colors)[i]) store_le<std::uint8_t>(out, ch);
    } else {
      for (int a = 0; a < 3; ++a) {
        if (a) out += ' ';
        out += scalar == PlyScalar::f64 ? fmt(p[a], 17) : fmt(static_cast<float>(p[a]), 9);
      }
      if (colors)
        for (auto ch : (*colors)[i]) out += ' ' + std::to_string(ch);
      out += '\n';
    }
  }
  return out;
}

}  // namespace ply_detail

/// Binary output is little-endian float32 unless `scalar` asks for float64.
inline void write_point_cloud(const PointCloud& c, const std::string& path, PlyFormat format = PlyFormat::binary,
                              PlyScalar scalar = PlyScalar::f32) {
  ply_detail::write_file(path, ply_detail::encode(c, format, scalar, nullptr));
}

// ---------------------------------------------------------------------------
// Coloured debug exports

/// Label used for breaking-curve points in labeled exports.
inline constexpr std::int32_t kCurveLabel = -1;

/// Deterministic palette colour for a region id. Saturation stays below 1,
/// so no id ever maps to pure red.
inline Rgb region_color(std::int32_t id) {
  if (id < 0) return {255, 0, 0};
  const double golden = 0.6180339887498949;
  const double hue = std::fmod(0.13 + golden * static_cast<double>(id), 1.0) * 6.0;
  const double sat = 0.55 + 0.1 * static_cast<double>(id % 3);
  const double val = 0.95 - 0.1 * static_cast<double>((id / 3) % 3);
  const double c = val * sat;
  const double x = c * (1.0 - std::abs(std::fmod(hue, 2.0) - 1.0));
  const double m = val - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hue)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const auto q = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  return {q(r + m), q(g + m), q(b + m)};
}

struct LabeledCloudExport {
  PointCloud cloud;
  std::vector<std::int32_t> labels;  // region id, or kCurveLabel
};

/// Binary PLY with per-vertex uchar red/green/blue: curve points pure red,
/// regions from region_color().
inline void write_labeled_cloud(const LabeledCloudExport& e, const std::string& path) {
  if (e.labels.size() != e.cloud.size()) throw std::invalid_argument("labels length differs from point count");
  std::vector<Rgb> colors;
  colors.reserve(e.labels.size());
  for (auto l : e.labels) colors.push_back(l < 0 ? Rgb{255, 0, 0} : region_color(l));
  ply_detail::write_file(path, ply_detail::encode(e.cloud, PlyFormat::binary, PlyScalar::f32, &colors));
}

}  // namespace fragmatch
