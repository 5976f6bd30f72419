#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "rismask/binary_io.hpp"
#include "rismask/constants.hpp"
#include "rismask/em_core.hpp"
#include "rismask/errors.hpp"
#include "rismask/scene.hpp"

namespace rismask {

enum class MaskKind : std::uint32_t { mask2d = 0, mask3d = 1 };

/// Amplitude pattern family. Hadamard is the only one shipped; the enum is
/// the extension point for random or Fourier patterns.
enum class MaskPattern { hadamard };

/// How the 2D phase profile is chosen: first-order expansion of R' around
/// the target center, or the exact pi/2 + k R' per point.
enum class PhaseRule { taylor, exact };

/// Which mask values an analysis step reads.
enum class MaskSource { automatic, ideal, realized };

/// Row i holds the mask of measurement i over the M target samples.
struct MaskSet {
  MaskKind kind = MaskKind::mask2d;
  Eigen::MatrixXcd ideal;                    // I x M
  std::optional<Eigen::MatrixXcd> realized;  // I x M, filled by RIS synthesis
  std::optional<Eigen::MatrixXcd> profiles;  // I x N, RIS coefficients behind `realized`
  std::uint64_t fingerprint = 0;

  Eigen::Index count() const { return ideal.rows(); }
  Eigen::Index points() const { return ideal.cols(); }

  /// Realized masks when present, ideal otherwise (unless forced).
  const Eigen::MatrixXcd& select(MaskSource src = MaskSource::automatic) const {
    if (src == MaskSource::ideal) return ideal;
    if (src == MaskSource::realized) {
      if (!realized) throw Error(ErrorCode::empty_mask_set, "no realized masks in this set");
      return *realized;
    }
    return realized ? *realized : ideal;
  }
};

inline bool is_power_of_two(std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

/// Sylvester Hadamard matrix, H^T H = order * I.
inline Eigen::MatrixXi hadamard(std::int64_t order) {
  if (order < 2 || !is_power_of_two(order))
    throw Error(ErrorCode::unsupported_order,
                "Hadamard order " + std::to_string(order) + " is not a power of two >= 2");
  Eigen::MatrixXi h(1, 1);
  h(0, 0) = 1;
  while (h.rows() < order) {
    const Eigen::Index n = h.rows();
    Eigen::MatrixXi next(2 * n, 2 * n);
    next << h, h, h, -h;
    h = std::move(next);
  }
  return h;
}

/// q_{i,m} = (1 + H[i, m+1]) / 2: Hadamard columns 2..M+1 mapped from {-1,1} to {0,1}.
inline Eigen::MatrixXd design_amplitudes(std::int64_t measurements, std::int64_t points) {
  if (points < 1) throw Error(ErrorCode::dimension_mismatch, "need at least one target point");
  if (measurements < points + 1)
    throw Error(ErrorCode::insufficient_measurements,
                "I = " + std::to_string(measurements) + " < M + 1 = " + std::to_string(points + 1));
  const Eigen::MatrixXi h = hadamard(measurements);
  return ((h.middleCols(1, points).cast<double>().array() + 1.0) / 2.0).matrix();
}

/// 3D masks: same -1 -> 0 mapping. The all-ones first column is skipped
/// whenever I >= M + 1; with I == M it has to be used and that voxel is
/// left without variance (flagged at reconstruction).
inline Eigen::MatrixXd design_amplitudes_3d(std::int64_t measurements, std::int64_t points) {
  if (points < 1) throw Error(ErrorCode::dimension_mismatch, "need at least one target point");
  if (measurements < points)
    throw Error(ErrorCode::insufficient_measurements,
                "I = " + std::to_string(measurements) + " < M = " + std::to_string(points));
  const Eigen::MatrixXi h = hadamard(measurements);
  const Eigen::Index first = measurements >= points + 1 ? 1 : 0;
  return ((h.middleCols(first, points).cast<double>().array() + 1.0) / 2.0).matrix();
}

/// Phase g_m that makes K(r'_m) J'_m real and positive at every target point.
inline Eigen::VectorXd design_phases_2d(const ValidatedScene& scene, const SampleGrids& g,
                                        PhaseRule rule = PhaseRule::taylor) {
  const auto& c = scene.config();
  if (c.target_kind != TargetKind::plane2d)
    throw Error(ErrorCode::kind_mismatch, "phase design is defined for plane2d targets");
  const double k = c.k();
  const double r0 = c.receiver_distance();
  Eigen::VectorXd out(static_cast<Eigen::Index>(g.target_points.size()));
  for (Eigen::Index m = 0; m < out.size(); ++m) {
    const Point3& t = g.target_points[m];
    const double path = rule == PhaseRule::taylor
                            ? r0 - (c.receiver.x / r0) * t.x - (c.receiver.y / r0) * t.y
                            : distance(t, c.receiver);
    out[m] = pi / 2.0 + k * path;
  }
  return out;
}

struct MaskOptions {
  PhaseRule phase_rule = PhaseRule::taylor;
  MaskPattern pattern = MaskPattern::hadamard;
};

/// Ideal masks for I measurements: q_i * e^{j g} in 2D, real 0/1 in 3D.
inline MaskSet ideal_masks(const ValidatedScene& scene, const SampleGrids& g, std::int64_t measurements,
                           const MaskOptions& opt = {}) {
  const auto m = static_cast<std::int64_t>(g.target_points.size());
  MaskSet set;
  set.fingerprint = scene_fingerprint(scene.config());
  if (scene->target_kind == TargetKind::plane2d) {
    set.kind = MaskKind::mask2d;
    const Eigen::MatrixXd q = design_amplitudes(measurements, m);
    const Eigen::VectorXd phase = design_phases_2d(scene, g, opt.phase_rule);
    Eigen::RowVectorXcd rot(m);
    for (Eigen::Index i = 0; i < m; ++i) rot[i] = std::polar(1.0, phase[i]);
    set.ideal = q.cast<cdouble>().array().rowwise() * rot.array();
  } else {
    set.kind = MaskKind::mask3d;
    set.ideal = design_amplitudes_3d(measurements, m).cast<cdouble>();
  }
  return set;
}

/// v_m = <u(m) u(m0)> - <u(m)><u(m0)> over the I measurements, u = |mask|.
inline Eigen::VectorXd mask_covariance(const MaskSet& masks, Eigen::Index ref,
                                       MaskSource src = MaskSource::automatic) {
  if (masks.count() == 0 || masks.points() == 0)
    throw Error(ErrorCode::empty_mask_set, "mask covariance of an empty set");
  if (ref < 0 || ref >= masks.points())
    throw Error(ErrorCode::dimension_mismatch, "reference index out of range");
  const Eigen::MatrixXd u = masks.select(src).cwiseAbs();
  const double inv_i = 1.0 / static_cast<double>(u.rows());
  const Eigen::RowVectorXd mean = u.colwise().sum() * inv_i;
  const Eigen::MatrixXd centered = u.rowwise() - mean;
  return (centered.transpose() * centered.col(ref)) * inv_i;
}

inline void save_masks(const std::string& path, const MaskSet& masks, MaskSource src) {
  const auto& data = masks.select(src);
  write_block_file(path,
                   {static_cast<std::uint32_t>(masks.kind), static_cast<std::uint64_t>(data.rows()),
                    static_cast<std::uint64_t>(data.cols()), masks.fingerprint},
                   data);
}

/// Reads an exported set back as its ideal masks.
inline MaskSet load_masks(const std::string& path) {
  BlockHeader h;
  MaskSet set;
  set.ideal = read_block_file(path, h);
  if (h.kind > 1) throw Error(ErrorCode::malformed_file, "unknown mask kind in " + path);
  set.kind = static_cast<MaskKind>(h.kind);
  set.fingerprint = h.fingerprint;
  return set;
}

}  // namespace rismask
