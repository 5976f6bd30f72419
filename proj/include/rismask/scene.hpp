#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "rismask/config.hpp"
#include "rismask/constants.hpp"
#include "rismask/errors.hpp"

namespace rismask {

enum class TargetKind { plane2d, volume3d };

inline const char* to_string(TargetKind kind) {
  return kind == TargetKind::plane2d ? "plane2d" : "volume3d";
}

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

inline double distance(const Point3& a, const Point3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

/// Geometry, sampling and power settings of one experiment. SI units; the
/// incident elevation is held in radians (config files carry degrees).
struct SceneConfig {
  double wavelength = 0.01;
  double ris_len_x = 0.25;
  double ris_len_y = 0.25;
  double target_len_x = 0.125;
  double target_len_y = 0.125;
  double target_distance = 0.125;
  double incident_elevation = deg_to_rad(30.0);
  double incident_amplitude = 1.0;
  Point3 receiver{10.0, 10.0, -2.5};
  double amplification = 1.0;
  int ris_nx = 32;
  int ris_ny = 32;
  int target_nx = 15;
  int target_ny = 15;
  int target_nz = 1;
  double region_depth = 0.0;  // volume3d only
  TargetKind target_kind = TargetKind::plane2d;
  cdouble reflection_coeff{-1.0, 0.0};  // plane2d only, PEC by default
  /// Scales the target Rayleigh distance in the receiver check. 1 is the
  /// textbook bound; 0.5 halves it (50 m for a' = b' = 0.5 m, lambda = 1 cm).
  double far_field_factor = 1.0;

  double k() const { return wavenumber(wavelength); }
  int n_ris() const { return ris_nx * ris_ny; }
  int n_target() const {
    return target_nx * target_ny * (target_kind == TargetKind::volume3d ? target_nz : 1);
  }
  Point3 target_center() const { return {0.0, 0.0, target_distance}; }
  double receiver_distance() const { return distance(receiver, target_center()); }
  double ris_rayleigh_distance() const {
    return 2.0 * (ris_len_x * ris_len_x + ris_len_y * ris_len_y) / wavelength;
  }
  double target_rayleigh_distance() const {
    return 2.0 * (target_len_x * target_len_x + target_len_y * target_len_y) / wavelength;
  }
};

/// A SceneConfig that passed validate_scene. Only constructible through it.
class ValidatedScene {
 public:
  const SceneConfig& config() const { return cfg_; }
  const SceneConfig* operator->() const { return &cfg_; }

 private:
  explicit ValidatedScene(SceneConfig cfg) : cfg_(std::move(cfg)) {}
  friend ValidatedScene validate_scene(const SceneConfig& cfg);

  SceneConfig cfg_;
};

inline ValidatedScene validate_scene(const SceneConfig& cfg) {
  const std::pair<const char*, double> positive[] = {
      {"wavelength", cfg.wavelength},          {"ris_len_x", cfg.ris_len_x},
      {"ris_len_y", cfg.ris_len_y},            {"target_len_x", cfg.target_len_x},
      {"target_len_y", cfg.target_len_y},      {"target_distance", cfg.target_distance},
      {"amplification", cfg.amplification},    {"incident_amplitude", cfg.incident_amplitude},
  };
  for (const auto& [name, value] : positive) {
    if (!(value > 0.0) || !std::isfinite(value))
      throw Error(ErrorCode::non_positive_dimension, std::string(name) + " must be > 0");
  }
  if (cfg.ris_nx < 1 || cfg.ris_ny < 1 || cfg.target_nx < 1 || cfg.target_ny < 1 ||
      cfg.target_nz < 1)
    throw Error(ErrorCode::non_positive_dimension, "sample counts must be >= 1");
  if (cfg.target_kind == TargetKind::volume3d) {
    if (!(cfg.region_depth > 0.0))
      throw Error(ErrorCode::non_positive_dimension, "region_depth must be > 0 for volume3d");
    if (cfg.target_distance - cfg.region_depth / 2.0 <= 0.0)
      throw Error(ErrorCode::non_positive_dimension, "volume must lie in front of the RIS (z > 0)");
  }
  if (cfg.target_distance >= cfg.ris_rayleigh_distance())
    throw Error(ErrorCode::near_field_violation,
                "target distance " + std::to_string(cfg.target_distance) +
                    " m is not below the RIS Rayleigh distance " +
                    std::to_string(cfg.ris_rayleigh_distance()) + " m");
  if (!(cfg.far_field_factor > 0.0))
    throw Error(ErrorCode::non_positive_dimension, "far_field_factor must be > 0");
  if (cfg.receiver_distance() <= cfg.far_field_factor * cfg.target_rayleigh_distance())
    throw Error(ErrorCode::far_field_violation,
                "receiver distance " + std::to_string(cfg.receiver_distance()) +
                    " m is not beyond the target Rayleigh distance " +
                    std::to_string(cfg.far_field_factor * cfg.target_rayleigh_distance()) + " m");
  return ValidatedScene(cfg);
}

/// Cell-centered sample points, ordered x fastest, then y, then z.
struct SampleGrids {
  std::vector<Point3> ris_points;
  std::vector<Point3> target_points;
  double ris_dx = 0.0;
  double ris_dy = 0.0;
  double target_dx = 0.0;
  double target_dy = 0.0;
  double target_dz = 0.0;  // volume3d only
  double ris_cell_area() const { return ris_dx * ris_dy; }
  /// Pixel area for plane2d, voxel volume for volume3d.
  double target_cell_measure = 0.0;
};

namespace detail {
inline double cell_center(double length, int count, int index) {
  const double step = length / count;
  return -length / 2.0 + (index + 0.5) * step;
}
}  // namespace detail

inline SampleGrids sample_grids(const ValidatedScene& scene) {
  const auto& c = scene.config();
  SampleGrids g;
  g.ris_dx = c.ris_len_x / c.ris_nx;
  g.ris_dy = c.ris_len_y / c.ris_ny;
  g.ris_points.reserve(static_cast<std::size_t>(c.n_ris()));
  for (int iy = 0; iy < c.ris_ny; ++iy)
    for (int ix = 0; ix < c.ris_nx; ++ix)
      g.ris_points.push_back({detail::cell_center(c.ris_len_x, c.ris_nx, ix),
                              detail::cell_center(c.ris_len_y, c.ris_ny, iy), 0.0});

  g.target_dx = c.target_len_x / c.target_nx;
  g.target_dy = c.target_len_y / c.target_ny;
  const int nz = c.target_kind == TargetKind::volume3d ? c.target_nz : 1;
  g.target_points.reserve(static_cast<std::size_t>(c.n_target()));
  for (int iz = 0; iz < nz; ++iz) {
    const double z = c.target_kind == TargetKind::volume3d
                         ? c.target_distance + detail::cell_center(c.region_depth, nz, iz)
                         : c.target_distance;
    for (int iy = 0; iy < c.target_ny; ++iy)
      for (int ix = 0; ix < c.target_nx; ++ix)
        g.target_points.push_back({detail::cell_center(c.target_len_x, c.target_nx, ix),
                                   detail::cell_center(c.target_len_y, c.target_ny, iy), z});
  }
  if (c.target_kind == TargetKind::volume3d) {
    g.target_dz = c.region_depth / nz;
    g.target_cell_measure = g.target_dx * g.target_dy * g.target_dz;
  } else {
    g.target_cell_measure = g.target_dx * g.target_dy;
  }
  return g;
}

/// sin(theta/2) of the angle an aperture of the given length subtends from
/// a point at distance z on its axis.
inline double half_angle_sine(double aperture, double z) {
  return aperture / std::sqrt(aperture * aperture + 4.0 * z * z);
}

inline double resolution_from_sine(double wavelength, double half_sine) {
  return wavelength / (2.0 * half_sine);
}

struct Resolution {
  double dx;
  double dy;
  double sine_x;
  double sine_y;
};

/// Cross-range resolution set by the aperture the RIS subtends at the target.
inline Resolution resolution(const ValidatedScene& scene) {
  const auto& c = scene.config();
  const double sx = half_angle_sine(c.ris_len_x, c.target_distance);
  const double sy = half_angle_sine(c.ris_len_y, c.target_distance);
  return {resolution_from_sine(c.wavelength, sx), resolution_from_sine(c.wavelength, sy), sx, sy};
}

// ---------------------------------------------------------------------------
// Config file mapping. Angles are in degrees in the file.
// ---------------------------------------------------------------------------

inline SceneConfig scene_from_keys(const KeyValues& kv, SceneConfig base = {}) {
  SceneConfig c = std::move(base);
  c.wavelength = kv.get_double("wavelength", c.wavelength);
  c.ris_len_x = kv.get_double("ris_len_x", c.ris_len_x);
  c.ris_len_y = kv.get_double("ris_len_y", c.ris_len_y);
  c.target_len_x = kv.get_double("target_len_x", c.target_len_x);
  c.target_len_y = kv.get_double("target_len_y", c.target_len_y);
  c.target_distance = kv.get_double("target_distance", c.target_distance);
  if (kv.contains("incident_elevation"))
    c.incident_elevation = deg_to_rad(kv.get_double("incident_elevation", 0.0));
  c.incident_amplitude = kv.get_double("incident_amplitude", c.incident_amplitude);
  c.receiver.x = kv.get_double("receiver_x", c.receiver.x);
  c.receiver.y = kv.get_double("receiver_y", c.receiver.y);
  c.receiver.z = kv.get_double("receiver_z", c.receiver.z);
  c.amplification = kv.get_double("amplification", c.amplification);
  c.ris_nx = static_cast<int>(kv.get_int("ris_nx", c.ris_nx));
  c.ris_ny = static_cast<int>(kv.get_int("ris_ny", c.ris_ny));
  c.target_nx = static_cast<int>(kv.get_int("target_nx", c.target_nx));
  c.target_ny = static_cast<int>(kv.get_int("target_ny", c.target_ny));
  c.target_nz = static_cast<int>(kv.get_int("target_nz", c.target_nz));
  c.region_depth = kv.get_double("region_depth", c.region_depth);
  if (kv.contains("target_kind")) {
    const auto kind = kv.get_string("target_kind", "");
    if (kind == "plane2d") c.target_kind = TargetKind::plane2d;
    else if (kind == "volume3d") c.target_kind = TargetKind::volume3d;
    else throw Error(ErrorCode::invalid_config, "target_kind must be plane2d or volume3d");
  }
  c.reflection_coeff = {kv.get_double("reflection_re", c.reflection_coeff.real()),
                        kv.get_double("reflection_im", c.reflection_coeff.imag())};
  c.far_field_factor = kv.get_double("far_field_factor", c.far_field_factor);
  return c;
}

namespace detail {
inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

/// Canonical `key = value` dump; round-trips through scene_from_keys.
inline std::string scene_to_text(const SceneConfig& c) {
  using detail::fmt_double;
  std::string s;
  auto put = [&s](const char* key, const std::string& value) {
    s += key;
    s += " = ";
    s += value;
    s += '\n';
  };
  put("wavelength", fmt_double(c.wavelength));
  put("ris_len_x", fmt_double(c.ris_len_x));
  put("ris_len_y", fmt_double(c.ris_len_y));
  put("target_len_x", fmt_double(c.target_len_x));
  put("target_len_y", fmt_double(c.target_len_y));
  put("target_distance", fmt_double(c.target_distance));
  put("incident_elevation", fmt_double(c.incident_elevation * 180.0 / pi));
  put("incident_amplitude", fmt_double(c.incident_amplitude));
  put("receiver_x", fmt_double(c.receiver.x));
  put("receiver_y", fmt_double(c.receiver.y));
  put("receiver_z", fmt_double(c.receiver.z));
  put("amplification", fmt_double(c.amplification));
  put("ris_nx", std::to_string(c.ris_nx));
  put("ris_ny", std::to_string(c.ris_ny));
  put("target_nx", std::to_string(c.target_nx));
  put("target_ny", std::to_string(c.target_ny));
  put("target_nz", std::to_string(c.target_nz));
  put("region_depth", fmt_double(c.region_depth));
  put("target_kind", to_string(c.target_kind));
  put("reflection_re", fmt_double(c.reflection_coeff.real()));
  put("reflection_im", fmt_double(c.reflection_coeff.imag()));
  put("far_field_factor", fmt_double(c.far_field_factor));
  return s;
}

/// FNV-1a 64 of the canonical dump; keys kernel caches and binary exports.
inline std::uint64_t scene_fingerprint(const SceneConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : scene_to_text(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace rismask
