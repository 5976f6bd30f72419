#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rismask/constants.hpp"
#include "rismask/em_core.hpp"
#include "rismask/errors.hpp"
#include "rismask/mask_design.hpp"
#include "rismask/measurement.hpp"
#include "rismask/scene.hpp"

namespace rismask {

/// Per-point mask variance c_m and the points where it vanishes.
struct MaskVariance {
  Eigen::VectorXd c;
  std::vector<bool> flagged;

  Eigen::Index flagged_count() const {
    Eigen::Index n = 0;
    for (bool f : flagged) n += f ? 1 : 0;
    return n;
  }
};

/// Variance over measurements of |mask| (2D) or of the complex mask (3D,
/// E|B - <B>|^2). Points with (numerically) zero variance are flagged.
inline MaskVariance estimate_c(const MaskSet& masks, MaskSource src = MaskSource::automatic) {
  if (masks.count() == 0 || masks.points() == 0)
    throw Error(ErrorCode::empty_mask_set, "cannot estimate c from an empty mask set");
  const auto& mk = masks.select(src);
  const double inv_i = 1.0 / static_cast<double>(mk.rows());
  MaskVariance out;
  out.flagged.assign(static_cast<std::size_t>(mk.cols()), false);
  if (masks.kind == MaskKind::mask2d) {
    const Eigen::MatrixXd u = mk.cwiseAbs();
    const Eigen::RowVectorXd mean = u.colwise().sum() * inv_i;
    out.c = (u.rowwise() - mean).colwise().squaredNorm().transpose() * inv_i;
  } else {
    const Eigen::RowVectorXcd mean = mk.colwise().sum() * inv_i;
    out.c = (mk.rowwise() - mean).colwise().squaredNorm().transpose() * inv_i;
  }
  // Relative floor: a constant column can leave rounding residue instead of an exact 0.
  const double scale = mk.cwiseAbs2().sum() * inv_i / static_cast<double>(mk.cols());
  for (Eigen::Index m = 0; m < out.c.size(); ++m)
    if (!(out.c[m] > 1e-24 * scale)) {
      out.c[m] = 0.0;
      out.flagged[static_cast<std::size_t>(m)] = true;
    }
  return out;
}

struct RunMetadata {
  Eigen::Index measurements = 0;
  double snr_db = 0.0;
  double target_distance = 0.0;
  double gamma = 0.0;
};

struct ReconstructionResult {
  Eigen::VectorXcd estimate;  // real-valued for plane targets
  MaskVariance c;
  std::optional<double> nmse;
  RunMetadata meta;
};

/// |K_m| at every target sample.
inline Eigen::VectorXd psf_magnitudes(const ValidatedScene& scene, const SampleGrids& g) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(g.target_points.size()));
  for (Eigen::Index m = 0; m < out.size(); ++m) out[m] = std::abs(psf(scene.config(), g.target_points[m]));
  return out;
}

/// T_m = sum_i (|E_i| - <|E|>) |J'_{i,m}| / (I c_m |K_m|). The mask
/// amplitudes stand in for |J'|; the (1 - Gamma') factor is left out.
inline ReconstructionResult reconstruct_2d(const Eigen::VectorXd& intensities, const Eigen::MatrixXd& amplitudes,
                                           const Eigen::VectorXd& psf_abs, const MaskVariance& c) {
  const Eigen::Index count = amplitudes.rows();
  const Eigen::Index points = amplitudes.cols();
  if (intensities.size() != count || psf_abs.size() != points || c.c.size() != points)
    throw Error(ErrorCode::dimension_mismatch, "measurement, mask, PSF and c sizes disagree");
  if (count == 0) throw Error(ErrorCode::empty_set, "no measurements");
  const double mean = intensities.mean();
  const Eigen::VectorXd centered = intensities.array() - mean;
  const Eigen::VectorXd corr = amplitudes.transpose() * centered;
  ReconstructionResult out;
  out.c = c;
  out.estimate = Eigen::VectorXcd::Zero(points);
  for (Eigen::Index m = 0; m < points; ++m) {
    if (c.flagged[static_cast<std::size_t>(m)]) continue;
    out.estimate[m] = corr[m] / (static_cast<double>(count) * c.c[m] * psf_abs[m]);
  }
  out.meta.measurements = count;
  return out;
}

inline ReconstructionResult reconstruct_2d(const MeasurementSet& records, const MaskSet& masks,
                                           const Eigen::VectorXd& psf_abs, MaskSource src = MaskSource::automatic) {
  if (records.size() != masks.count())
    throw Error(ErrorCode::dimension_mismatch, "record count differs from mask count");
  auto out = reconstruct_2d(records.magnitudes(), masks.select(src).cwiseAbs(), psf_abs, estimate_c(masks, src));
  out.meta.snr_db = records.snr_db;
  return out;
}

/// chi_m = sum_i (E_i - <E>) conj(B_i(m)) / (I k^2 c_m). For real masks this
/// is the plain correlation; the conjugate keeps it a matched filter when the
/// realized masks pick up phase.
inline ReconstructionResult reconstruct_3d(const Eigen::VectorXcd& fields, const Eigen::MatrixXcd& masks,
                                           const MaskVariance& c, double k) {
  const Eigen::Index count = masks.rows();
  const Eigen::Index points = masks.cols();
  if (fields.size() != count || c.c.size() != points)
    throw Error(ErrorCode::dimension_mismatch, "measurement, mask and c sizes disagree");
  if (count == 0) throw Error(ErrorCode::empty_set, "no measurements");
  const cdouble mean = fields.mean();
  const Eigen::VectorXcd centered = fields.array() - mean;
  const Eigen::VectorXcd corr = masks.adjoint() * centered;
  ReconstructionResult out;
  out.c = c;
  out.estimate = Eigen::VectorXcd::Zero(points);
  for (Eigen::Index m = 0; m < points; ++m) {
    if (c.flagged[static_cast<std::size_t>(m)]) continue;
    out.estimate[m] = corr[m] / (static_cast<double>(count) * k * k * c.c[m]);
  }
  out.meta.measurements = count;
  return out;
}

inline ReconstructionResult reconstruct_3d(const MeasurementSet& records, const MaskSet& masks, double k,
                                           MaskSource src = MaskSource::automatic) {
  if (records.size() != masks.count())
    throw Error(ErrorCode::dimension_mismatch, "record count differs from mask count");
  auto out = reconstruct_3d(records.noisy_fields(), masks.select(src), estimate_c(masks, src), k);
  out.meta.snr_db = records.snr_db;
  return out;
}

/// ||t - t_hat||^2 / ||t||^2.
inline double nmse(const Eigen::VectorXcd& truth, const Eigen::VectorXcd& estimate) {
  if (truth.size() != estimate.size()) throw Error(ErrorCode::dimension_mismatch, "grid shapes differ");
  const double den = truth.squaredNorm();
  if (!(den > 0.0)) throw Error(ErrorCode::zero_truth, "NMSE against an all-zero truth");
  return (truth - estimate).squaredNorm() / den;
}

/// NMSE over the points that are not flagged (diagnostic mode).
inline double nmse_unflagged(const Eigen::VectorXcd& truth, const Eigen::VectorXcd& estimate,
                             const std::vector<bool>& flagged) {
  if (truth.size() != estimate.size() || static_cast<Eigen::Index>(flagged.size()) != truth.size())
    throw Error(ErrorCode::dimension_mismatch, "grid shapes differ");
  double num = 0.0, den = 0.0;
  for (Eigen::Index m = 0; m < truth.size(); ++m) {
    if (flagged[static_cast<std::size_t>(m)]) continue;
    num += std::norm(truth[m] - estimate[m]);
    den += std::norm(truth[m]);
  }
  if (!(den > 0.0)) throw Error(ErrorCode::zero_truth, "NMSE against an all-zero truth");
  return num / den;
}

enum class Calibration { none, max1, lsq };

inline const char* to_string(Calibration c) {
  switch (c) {
    case Calibration::none: return "none";
    case Calibration::max1: return "max1";
    case Calibration::lsq: return "lsq";
  }
  return "none";
}

inline Calibration parse_calibration(const std::string& s) {
  if (s == "none") return Calibration::none;
  if (s == "max1") return Calibration::max1;
  if (s == "lsq") return Calibration::lsq;
  throw Error(ErrorCode::invalid_config, "calibration must be none, max1 or lsq");
}

/// Rescales an estimate for comparison with a 0/1 (or chi) truth. `max1`
/// divides by the largest magnitude; `lsq` fits one complex scalar to the
/// truth and therefore needs it.
inline Eigen::VectorXcd calibrate_estimate(const Eigen::VectorXcd& estimate, Calibration mode,
                                           const Eigen::VectorXcd* truth = nullptr) {
  switch (mode) {
    case Calibration::none:
      return estimate;
    case Calibration::max1: {
      const double peak = estimate.cwiseAbs().maxCoeff();
      return peak > 0.0 ? Eigen::VectorXcd(estimate / peak) : estimate;
    }
    case Calibration::lsq: {
      if (!truth) throw Error(ErrorCode::invalid_config, "lsq calibration needs the truth");
      if (truth->size() != estimate.size()) throw Error(ErrorCode::dimension_mismatch, "grid shapes differ");
      const double den = estimate.squaredNorm();
      if (!(den > 0.0)) return estimate;
      const cdouble alpha = estimate.dot(*truth) / den;  // dot conjugates the first argument
      return estimate * alpha;
    }
  }
  return estimate;
}

}  // namespace rismask
