#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rismask/constants.hpp"
#include "rismask/em_core.hpp"
#include "rismask/errors.hpp"
#include "rismask/mask_design.hpp"
#include "rismask/random.hpp"
#include "rismask/scene.hpp"

namespace rismask {

/// Ground-truth target on the scene's sample grid (x fastest, then y, then z).
struct TargetModel {
  TargetKind kind = TargetKind::plane2d;
  int nx = 0;
  int ny = 0;
  int nz = 1;
  Eigen::VectorXd occupancy;   // plane2d, values exactly 0 or 1
  Eigen::VectorXcd contrast;   // volume3d, chi per voxel
  cdouble reflection{-1.0, 0.0};

  Eigen::Index size() const { return static_cast<Eigen::Index>(nx) * ny * nz; }

  /// Flattened ground truth, T for planes and chi for volumes.
  Eigen::VectorXcd values() const {
    return kind == TargetKind::plane2d ? Eigen::VectorXcd(occupancy.cast<cdouble>()) : contrast;
  }

  static TargetModel plane(int nx, int ny, Eigen::VectorXd occupancy, cdouble reflection = {-1.0, 0.0}) {
    if (occupancy.size() != static_cast<Eigen::Index>(nx) * ny)
      throw Error(ErrorCode::size_mismatch, "occupancy grid size differs from nx*ny");
    for (Eigen::Index i = 0; i < occupancy.size(); ++i)
      if (occupancy[i] != 0.0 && occupancy[i] != 1.0)
        throw Error(ErrorCode::malformed_image, "plane targets are binary (0 or 1)");
    TargetModel t;
    t.kind = TargetKind::plane2d;
    t.nx = nx;
    t.ny = ny;
    t.nz = 1;
    t.occupancy = std::move(occupancy);
    t.reflection = reflection;
    return t;
  }

  static TargetModel volume(int nx, int ny, int nz, Eigen::VectorXcd contrast) {
    if (contrast.size() != static_cast<Eigen::Index>(nx) * ny * nz)
      throw Error(ErrorCode::size_mismatch, "contrast grid size differs from nx*ny*nz");
    for (Eigen::Index i = 0; i < contrast.size(); ++i)
      if (!(contrast[i].real() >= 0.0) || !(contrast[i].imag() >= 0.0))
        throw Error(ErrorCode::malformed_volume, "contrast needs eps_r >= 1 and sigma >= 0");
    TargetModel t;
    t.kind = TargetKind::volume3d;
    t.nx = nx;
    t.ny = ny;
    t.nz = nz;
    t.contrast = std::move(contrast);
    return t;
  }
};

/// chi = eps_r + j sigma / (eps0 omega) - 1. Loss shows up as Im(chi) >= 0.
inline cdouble contrast_from_material(double eps_r, double conductivity, double wavelength) {
  return {eps_r - 1.0, conductivity / (eps0 * angular_frequency(wavelength))};
}

inline void check_target_matches(const ValidatedScene& scene, const TargetModel& t) {
  const auto& c = scene.config();
  if (t.kind != c.target_kind) throw Error(ErrorCode::kind_mismatch, "target kind differs from scene");
  if (t.size() != c.n_target() || t.nx != c.target_nx || t.ny != c.target_ny)
    throw Error(ErrorCode::size_mismatch, "target grid differs from the scene sampling");
}

/// Current induced on the plane target, J' = (1 - Gamma') H_out^y.
inline Eigen::VectorXcd target_current_2d(const Eigen::VectorXcd& realized_mask, const TargetModel& target) {
  if (target.kind != TargetKind::plane2d)
    throw Error(ErrorCode::kind_mismatch, "target_current_2d needs a plane target");
  return (1.0 - target.reflection) * realized_mask;
}

/// E_r^x = sum_m K_m T_m J'_m dA.
inline cdouble receiver_field_2d(const ValidatedScene& scene, const SampleGrids& g,
                                 const Eigen::VectorXcd& current, const TargetModel& target) {
  if (target.kind != TargetKind::plane2d)
    throw Error(ErrorCode::kind_mismatch, "receiver_field_2d needs a plane target");
  if (current.size() != static_cast<Eigen::Index>(g.target_points.size()) ||
      target.occupancy.size() != current.size())
    throw Error(ErrorCode::dimension_mismatch, "current, target and grid sizes differ");
  cdouble sum{};
  for (Eigen::Index m = 0; m < current.size(); ++m) {
    if (target.occupancy[m] == 0.0) continue;
    sum += psf(scene.config(), g.target_points[m]) * target.occupancy[m] * current[m];
  }
  return sum * g.target_cell_measure;
}

/// Born approximation: E_r^x = k^2 sum_m chi_m (Y p)_m dV.
inline cdouble receiver_field_3d(const ValidatedScene& scene, const SampleGrids& g, const KernelMatrix& y,
                                 const Eigen::VectorXcd& p, const TargetModel& target) {
  if (target.kind != TargetKind::volume3d || y.kind != KernelKind::y_3d)
    throw Error(ErrorCode::kind_mismatch, "receiver_field_3d needs a volume target and a Y kernel");
  const Eigen::VectorXcd b = h_out_y(y, p);
  if (b.size() != target.contrast.size())
    throw Error(ErrorCode::dimension_mismatch, "kernel rows differ from voxel count");
  const double k = scene->k();
  return k * k * g.target_cell_measure * target.contrast.cwiseProduct(b).sum();
}

enum class NoiseMode { relative, absolute };

inline const char* to_string(NoiseMode m) { return m == NoiseMode::relative ? "relative" : "absolute"; }

/// N0 (dBm/Hz) integrated over a bandwidth (Hz), in dBm.
inline double thermal_noise_dbm(double n0_dbm_per_hz, double bandwidth_hz) {
  return n0_dbm_per_hz + 10.0 * std::log10(bandwidth_hz);
}

/// sigma^2 = mean |E|^2 / 10^{snr/10}.
inline double noise_variance(const Eigen::VectorXcd& noiseless, double snr_db) {
  if (noiseless.size() == 0) throw Error(ErrorCode::empty_set, "noise variance of no measurements");
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  const double power = noiseless.squaredNorm() / static_cast<double>(noiseless.size());
  return power / db_to_linear(snr_db);
}

struct NoiseSettings {
  double snr_db = 20.0;
  NoiseMode mode = NoiseMode::relative;
  /// Variance used in absolute mode; defaults to N0 B = -114 dBm.
  double absolute_variance = dbm_to_watts(thermal_noise_dbm(-174.0, 1e6));
  std::uint64_t seed = 1;
};

struct MeasurementRecord {
  Eigen::Index index = 0;
  cdouble noiseless;
  cdouble noisy;
  /// |noisy| for plane targets (what the detector reports); unused for volumes.
  double magnitude = 0.0;
};

struct MeasurementSet {
  TargetKind kind = TargetKind::plane2d;
  std::vector<MeasurementRecord> records;
  double sigma2 = 0.0;
  double snr_db = 0.0;
  NoiseMode mode = NoiseMode::relative;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(records.size()); }

  Eigen::VectorXd magnitudes() const {
    Eigen::VectorXd v(size());
    for (Eigen::Index i = 0; i < size(); ++i) v[i] = records[static_cast<std::size_t>(i)].magnitude;
    return v;
  }

  Eigen::VectorXcd noisy_fields() const {
    Eigen::VectorXcd v(size());
    for (Eigen::Index i = 0; i < size(); ++i) v[i] = records[static_cast<std::size_t>(i)].noisy;
    return v;
  }

  Eigen::VectorXcd noiseless_fields() const {
    Eigen::VectorXcd v(size());
    for (Eigen::Index i = 0; i < size(); ++i) v[i] = records[static_cast<std::size_t>(i)].noiseless;
    return v;
  }
};

/// Circularly-symmetric complex Gaussian sample of the given variance for
/// measurement `index`; depends only on (seed, index).
inline cdouble noise_sample(std::uint64_t seed, std::uint64_t index, double variance) {
  if (!(variance > 0.0)) return {};
  SplitMix64 rng(seed ^ index);
  std::normal_distribution<double> nd(0.0, std::sqrt(variance / 2.0));
  const double re = nd(rng);
  const double im = nd(rng);
  return {re, im};
}

/// Noiseless receiver fields for every mask in the set.
inline Eigen::VectorXcd noiseless_fields(const ValidatedScene& scene, const SampleGrids& g,
                                         const MaskSet& masks, const TargetModel& target,
                                         MaskSource src = MaskSource::automatic) {
  check_target_matches(scene, target);
  const auto& mk = masks.select(src);
  if (mk.cols() != target.size())
    throw Error(ErrorCode::dimension_mismatch, "mask length differs from target size");
  Eigen::VectorXcd weights(target.size());
  if (target.kind == TargetKind::plane2d) {
    if (masks.kind != MaskKind::mask2d) throw Error(ErrorCode::kind_mismatch, "plane target needs 2D masks");
    const cdouble factor = 1.0 - target.reflection;
    for (Eigen::Index m = 0; m < weights.size(); ++m)
      weights[m] = target.occupancy[m] == 0.0
                       ? cdouble{}
                       : psf(scene.config(), g.target_points[m]) * target.occupancy[m] * factor *
                             g.target_cell_measure;
  } else {
    if (masks.kind != MaskKind::mask3d) throw Error(ErrorCode::kind_mismatch, "volume target needs 3D masks");
    const double k = scene->k();
    weights = target.contrast * (k * k * g.target_cell_measure);
  }
  return mk * weights;
}

/// Simulates one run: noiseless fields, additive complex Gaussian noise on
/// the field, and magnitude detection for plane targets.
inline MeasurementSet measure(const ValidatedScene& scene, const SampleGrids& g, const MaskSet& masks,
                              const TargetModel& target, const NoiseSettings& noise,
                              MaskSource src = MaskSource::automatic) {
  const Eigen::VectorXcd clean = noiseless_fields(scene, g, masks, target, src);
  MeasurementSet out;
  out.kind = target.kind;
  out.snr_db = noise.snr_db;
  out.mode = noise.mode;
  out.seed = noise.seed;
  out.sigma2 = noise.mode == NoiseMode::relative ? noise_variance(clean, noise.snr_db) : noise.absolute_variance;
  out.records.resize(static_cast<std::size_t>(clean.size()));
  for (Eigen::Index i = 0; i < clean.size(); ++i) {
    auto& r = out.records[static_cast<std::size_t>(i)];
    r.index = i;
    r.noiseless = clean[i];
    r.noisy = clean[i] + noise_sample(noise.seed, static_cast<std::uint64_t>(i), out.sigma2);
    r.magnitude = std::abs(r.noisy);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV export: index, re_noiseless, im_noiseless, value_noisy_or_re, im_if_3d, sigma2, seed
// ---------------------------------------------------------------------------

inline void write_measurements_csv(std::ostream& out, const MeasurementSet& set) {
  out << "index,re_noiseless,im_noiseless,value_noisy_or_re,im_if_3d,sigma2,seed\r\n";
  char buf[256];
  for (const auto& r : set.records) {
    if (set.kind == TargetKind::plane2d)
      std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,,%.17g,%llu\r\n", static_cast<long long>(r.index),
                    r.noiseless.real(), r.noiseless.imag(), r.magnitude, set.sigma2,
                    static_cast<unsigned long long>(set.seed));
    else
      std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%llu\r\n",
                    static_cast<long long>(r.index), r.noiseless.real(), r.noiseless.imag(), r.noisy.real(),
                    r.noisy.imag(), set.sigma2, static_cast<unsigned long long>(set.seed));
    out << buf;
  }
}

inline void save_measurements_csv(const std::string& path, const MeasurementSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  write_measurements_csv(out, set);
}

inline MeasurementSet load_measurements_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::malformed_file, "empty measurement file");
  MeasurementSet set;
  bool kind_known = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 7) throw Error(ErrorCode::malformed_file, "expected 7 columns: " + line);
    try {
      MeasurementRecord r;
      r.index = std::stoll(f[0]);
      r.noiseless = {std::stod(f[1]), std::stod(f[2])};
      const bool volume = !f[4].empty();
      if (!kind_known) {
        set.kind = volume ? TargetKind::volume3d : TargetKind::plane2d;
        kind_known = true;
      }
      if (volume) {
        r.noisy = {std::stod(f[3]), std::stod(f[4])};
        r.magnitude = std::abs(r.noisy);
      } else {
        r.magnitude = std::stod(f[3]);
        r.noisy = r.magnitude;
      }
      set.sigma2 = std::stod(f[5]);
      set.seed = std::stoull(f[6]);
      set.records.push_back(r);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::malformed_file, "bad number in: " + line);
    }
  }
  return set;
}

}  // namespace rismask
