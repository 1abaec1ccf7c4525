#include "nsl/scene.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "nsl/error.hpp"
#include "nsl/rng.hpp"

namespace nsl {

using nlohmann::json;

void Material::validate() const {
  if (albedo < 0.0 || albedo > 1.0) throw ConfigError("material: albedo must be in [0,1]");
  if (specular_strength < 0.0 || specular_strength > 1.0) {
    throw ConfigError("material: specular_strength must be in [0,1]");
  }
  if (shininess < 1.0) throw ConfigError("material: shininess must be >= 1");
}

void Primitive::validate() const {
  material.validate();
  switch (kind) {
    case PrimitiveKind::kPlane: {
      const double n = extent.norm();
      if (std::abs(n - 1.0) > 1e-9) throw ConfigError("plane: normal must be unit length");
      break;
    }
    case PrimitiveKind::kSphere:
      if (extent.x() <= 0.0) throw ConfigError("sphere: radius must be positive");
      break;
    case PrimitiveKind::kBox:
      if ((extent - point).minCoeff() <= 0.0) {
        throw ConfigError("box: max corner must exceed min corner");
      }
      break;
  }
}

void Scene::validate() const {
  if (primitives.empty()) throw ConfigError("scene: needs at least one primitive");
  if (ambient_level < 0.0 || ambient_level > 1.0) {
    throw ConfigError("scene: ambient_level must be in [0,1]");
  }
  if (projector_power <= 0.0) throw ConfigError("scene: projector_power must be positive");
  for (const auto& p : primitives) p.validate();
}

const char* to_string(SceneDifficulty d) {
  switch (d) {
    case SceneDifficulty::kEasy: return "easy";
    case SceneDifficulty::kTextured: return "textured";
    case SceneDifficulty::kSpecular: return "specular";
    case SceneDifficulty::kOcclusion: return "occlusion";
  }
  throw ConfigError("unknown scene difficulty");
}

SceneDifficulty scene_difficulty_from_string(const std::string& name) {
  for (int i = 0; i < 4; ++i) {
    const auto d = static_cast<SceneDifficulty>(i);
    if (name == to_string(d)) return d;
  }
  throw ConfigError("unknown scene difficulty: " + name);
}

namespace {

Material random_material(Rng& rng, double albedo_lo, double albedo_hi, bool glossy) {
  Material m;
  m.albedo = rng.uniform(albedo_lo, albedo_hi);
  if (glossy) {
    m.specular_strength = rng.uniform(0.3, 0.9);
    m.shininess = rng.uniform(8.0, 64.0);
  }
  return m;
}

Primitive random_foreground(Rng& rng, const Material& mat) {
  Primitive p;
  const double z = rng.uniform(0.5, 2.4);
  // Lateral placement stays within a generic frustum; the exact camera FOV
  // is unknown here, so keep everything near the optical axis.
  const double x = rng.uniform(-0.28, 0.28) * z;
  const double y = rng.uniform(-0.18, 0.18) * z;
  const int shape = static_cast<int>(rng.next_below(3));
  if (shape == 0) {
    p.kind = PrimitiveKind::kSphere;
    p.point = {x, y, z};
    p.extent = {rng.uniform(0.05, 0.30), 0, 0};
  } else if (shape == 1) {
    p.kind = PrimitiveKind::kBox;
    const Eigen::Vector3d half{rng.uniform(0.04, 0.25), rng.uniform(0.04, 0.25),
                               rng.uniform(0.04, 0.25)};
    p.point = Eigen::Vector3d{x, y, z} - half;
    p.extent = Eigen::Vector3d{x, y, z} + half;
  } else {
    // Tilted card: a bounded plane.
    p.kind = PrimitiveKind::kPlane;
    p.point = {x, y, z};
    Eigen::Vector3d n{rng.uniform(-0.35, 0.35), rng.uniform(-0.35, 0.35), -1.0};
    p.extent = n.normalized();
    p.half_u = rng.uniform(0.08, 0.35);
    p.half_v = rng.uniform(0.08, 0.35);
  }
  p.material = mat;
  return p;
}

}  // namespace

Scene random_scene(std::uint64_t seed, SceneDifficulty difficulty) {
  Rng rng = Rng(seed).derive(0x5ce11eu);
  Scene scene;

  int n_fg = 0;
  double albedo_lo = 0.5, albedo_hi = 0.9;
  switch (difficulty) {
    case SceneDifficulty::kEasy:
      n_fg = 1 + static_cast<int>(rng.next_below(3));
      scene.ambient_level = rng.uniform(0.0, 0.05);
      break;
    case SceneDifficulty::kTextured:
      n_fg = 3 + static_cast<int>(rng.next_below(5));
      albedo_lo = 0.15;
      albedo_hi = 0.95;
      scene.ambient_level = rng.uniform(0.0, 0.10);
      break;
    case SceneDifficulty::kSpecular:
      n_fg = 2 + static_cast<int>(rng.next_below(4));
      albedo_lo = 0.2;
      scene.ambient_level = rng.uniform(0.05, 0.15);
      break;
    case SceneDifficulty::kOcclusion:
      n_fg = 2 + static_cast<int>(rng.next_below(4));
      albedo_lo = 0.2;
      scene.ambient_level = rng.uniform(0.05, 0.20);
      break;
  }
  scene.projector_power = rng.uniform(0.7, 1.4);

  // Background: fronto-parallel-ish wall, unbounded.
  Primitive wall;
  wall.kind = PrimitiveKind::kPlane;
  wall.point = {0, 0, rng.uniform(2.2, 3.0)};
  Eigen::Vector3d n{rng.uniform(-0.08, 0.08), rng.uniform(-0.08, 0.08), -1.0};
  wall.extent = n.normalized();
  wall.material = random_material(rng, albedo_lo, albedo_hi, false);
  scene.primitives.push_back(wall);

  for (int i = 0; i < n_fg; ++i) {
    const bool glossy =
        difficulty == SceneDifficulty::kSpecular && rng.next_double() < 0.6;
    scene.primitives.push_back(
        random_foreground(rng, random_material(rng, albedo_lo, albedo_hi, glossy)));
  }

  if (difficulty == SceneDifficulty::kOcclusion) {
    // Plant a sphere partway along the ray to an existing foreground
    // primitive so it fully occludes it from the left camera.
    const Primitive& behind = scene.primitives[1 + rng.next_below(n_fg)];
    Eigen::Vector3d target = behind.kind == PrimitiveKind::kBox
                                 ? (0.5 * (behind.point + behind.extent)).eval()
                                 : behind.point;
    Primitive front;
    front.kind = PrimitiveKind::kSphere;
    front.point = target * rng.uniform(0.45, 0.65);
    if (front.point.z() < 0.4) front.point.z() = 0.4;
    front.extent = {rng.uniform(0.05, 0.18), 0, 0};
    front.material = random_material(rng, albedo_lo, albedo_hi, false);
    scene.primitives.push_back(front);
  }

  scene.validate();
  return scene;
}

namespace {

json vec_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw ConfigError(std::string("scene json: ") + what + " must be a 3-array");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

const char* kind_name(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::kPlane: return "plane";
    case PrimitiveKind::kSphere: return "sphere";
    case PrimitiveKind::kBox: return "box";
  }
  throw ConfigError("unknown primitive kind");
}

}  // namespace

std::string scene_to_json(const Scene& scene) {
  json j;
  j["ambient_level"] = scene.ambient_level;
  j["projector_power"] = scene.projector_power;
  j["primitives"] = json::array();
  for (const auto& p : scene.primitives) {
    json pj;
    pj["kind"] = kind_name(p.kind);
    pj["material"] = {{"albedo", p.material.albedo},
                      {"specular_strength", p.material.specular_strength},
                      {"shininess", p.material.shininess}};
    switch (p.kind) {
      case PrimitiveKind::kPlane:
        pj["point"] = vec_to_json(p.point);
        pj["normal"] = vec_to_json(p.extent);
        if (p.half_u > 0.0 && p.half_v > 0.0) {
          pj["half_u"] = p.half_u;
          pj["half_v"] = p.half_v;
        }
        break;
      case PrimitiveKind::kSphere:
        pj["center"] = vec_to_json(p.point);
        pj["radius"] = p.extent.x();
        break;
      case PrimitiveKind::kBox:
        pj["min"] = vec_to_json(p.point);
        pj["max"] = vec_to_json(p.extent);
        break;
    }
    j["primitives"].push_back(pj);
  }
  return j.dump(2);
}

Scene scene_from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scene json: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("scene json: parse error in " + path.string() + ": " + e.what());
  }

  Scene scene;
  scene.ambient_level = j.value("ambient_level", 0.0);
  scene.projector_power = j.value("projector_power", 1.0);
  if (!j.contains("primitives") || !j["primitives"].is_array()) {
    throw ConfigError("scene json: missing primitives array");
  }
  for (const auto& pj : j["primitives"]) {
    Primitive p;
    const std::string kind = pj.value("kind", "");
    if (pj.contains("material")) {
      const auto& mj = pj["material"];
      p.material.albedo = mj.value("albedo", 0.7);
      p.material.specular_strength = mj.value("specular_strength", 0.0);
      p.material.shininess = mj.value("shininess", 16.0);
    }
    if (kind == "plane") {
      p.kind = PrimitiveKind::kPlane;
      p.point = vec_from_json(pj.at("point"), "plane point");
      p.extent = vec_from_json(pj.at("normal"), "plane normal").normalized();
      p.half_u = pj.value("half_u", -1.0);
      p.half_v = pj.value("half_v", -1.0);
    } else if (kind == "sphere") {
      p.kind = PrimitiveKind::kSphere;
      p.point = vec_from_json(pj.at("center"), "sphere center");
      p.extent = {pj.at("radius").get<double>(), 0, 0};
    } else if (kind == "box") {
      p.kind = PrimitiveKind::kBox;
      p.point = vec_from_json(pj.at("min"), "box min");
      p.extent = vec_from_json(pj.at("max"), "box max");
    } else {
      throw ConfigError("scene json: unknown primitive kind '" + kind + "'");
    }
    scene.primitives.push_back(p);
  }
  scene.validate();
  return scene;
}

}  // namespace nsl
