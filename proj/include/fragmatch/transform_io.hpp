#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "fragmatch/constants.hpp"
#include "fragmatch/geometry.hpp"

namespace fragmatch {

inline constexpr int kTransformSchemaVersion = 1;

class TransformFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// {"schema_version": 1, "rotation": [9 numbers, row-major], "translation": [3 numbers]}
inline nlohmann::json transform_to_json(const RigidTransform& t) {
  nlohmann::json rot = nlohmann::json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(t.rotation()(r, c));
  nlohmann::json tr = nlohmann::json::array();
  for (int a = 0; a < 3; ++a) tr.push_back(t.translation()[a]);
  return {{"schema_version", kTransformSchemaVersion}, {"rotation", rot}, {"translation", tr}};
}

inline RigidTransform transform_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw TransformFormatError("transform: expected a JSON object");
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
    throw TransformFormatError("transform: missing integer schema_version");
  if (j["schema_version"].get<int>() != kTransformSchemaVersion)
    throw TransformFormatError("transform: unsupported schema_version " + j["schema_version"].dump());
  const auto numbers = [&](const char* key, std::size_t n) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != n)
      throw TransformFormatError(std::string("transform: '") + key + "' must be an array of " + std::to_string(n) +
                                 " numbers");
    std::vector<double> v;
    for (const auto& e : j[key]) {
      if (!e.is_number()) throw TransformFormatError(std::string("transform: non-numeric entry in '") + key + "'");
      v.push_back(e.get<double>());
    }
    return v;
  };
  const auto r = numbers("rotation", 9);
  const auto t = numbers("translation", 3);
  Matrix3 rot;
  for (int i = 0; i < 9; ++i) rot(i / 3, i % 3) = r[static_cast<std::size_t>(i)];
  if (!rot.allFinite()) throw TransformFormatError("transform: non-finite rotation");
  if (rot.determinant() < 0.0) throw TransformFormatError("improper rotation");
  if (orthonormality_error(rot) > tol::kOrthonormalAccept) throw TransformFormatError("non-orthonormal rotation");
  return {rot, Point3(t[0], t[1], t[2])};
}

inline std::string transform_to_string(const RigidTransform& t) { return transform_to_json(t).dump(2) + "\n"; }

inline void write_transform(const RigidTransform& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << transform_to_string(t);
  if (!out) throw std::runtime_error(path + ": write failed");
}

inline RigidTransform read_transform(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": no such file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw TransformFormatError(path + ": malformed JSON: " + e.what());
  }
  try {
    return transform_from_json(j);
  } catch (const TransformFormatError& e) {
    throw TransformFormatError(path + ": " + e.what());
  }
}

}  // namespace fragmatch
