#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nsl {

struct Material {
  double albedo = 0.7;
  double specular_strength = 0.0;
  double shininess = 16.0;

  void validate() const;
};

enum class PrimitiveKind { kPlane, kSphere, kBox };

// Plane: point + unit normal, optionally bounded to a rectangle of half
// extents (half_u, half_v) in the plane's tangent frame; unbounded when the
// extents are nonpositive. Sphere: center + radius. Box: axis-aligned
// min/max corners.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kPlane;
  Eigen::Vector3d point = {0, 0, 1};     // plane anchor / sphere center / box min corner
  Eigen::Vector3d extent = {0, 0, -1};   // plane normal (unit) / (radius,_,_) / box max corner
  double half_u = -1.0;                  // plane-only rectangular bound
  double half_v = -1.0;
  Material material;

  void validate() const;
};

struct Scene {
  std::vector<Primitive> primitives;
  double ambient_level = 0.0;     // irradiance in [0, 1]
  double projector_power = 1.0;   // > 0

  void validate() const;
};

enum class SceneDifficulty { kEasy, kTextured, kSpecular, kOcclusion };

const char* to_string(SceneDifficulty d);
SceneDifficulty scene_difficulty_from_string(const std::string& name);

// Seeded scene with a background plane plus 1-7 foreground primitives in
// [0.4, 3.0] m. Difficulty selects material and occluder distributions:
// easy is small and Lambertian, textured varies albedo widely, specular adds
// glossy primitives, occlusion guarantees a primitive directly in front of
// another and raises the ambient floor.
Scene random_scene(std::uint64_t seed, SceneDifficulty difficulty);

// JSON scene description (see docs/config.md for the schema).
Scene scene_from_json_file(const std::filesystem::path& path);
std::string scene_to_json(const Scene& scene);

}  // namespace nsl
