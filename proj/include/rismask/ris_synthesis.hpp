#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "rismask/binary_io.hpp"
#include "rismask/em_core.hpp"
#include "rismask/errors.hpp"
#include "rismask/mask_design.hpp"

namespace rismask {

/// Which quantity is compared against threshold_factor * gamma when dropping
/// singular values: sigma^2 (default, same scale as gamma) or sigma itself.
enum class TruncationRule { sigma_squared, sigma };

/// Tikhonov-filtered pseudo-inverse V diag(lambda) U^H of a kernel, with
/// lambda = sigma / (sigma^2 + gamma) and weak modes zeroed.
struct RegularizedInverse {
  Eigen::MatrixXcd u;          // M x r (thin)
  Eigen::MatrixXcd v;          // N x r (thin)
  Eigen::VectorXd sigma;       // all singular values, descending
  Eigen::VectorXd lambda;      // filtered inverse values, 0 where truncated
  double gamma = 0.0;
  double threshold_factor = 0.0;
  TruncationRule rule = TruncationRule::sigma_squared;
  Eigen::Index retained_rank = 0;

  Eigen::Index rows() const { return v.rows(); }  // N
  Eigen::Index cols() const { return u.rows(); }  // M

  Eigen::VectorXcd apply(const Eigen::VectorXcd& y) const {
    if (y.size() != u.rows())
      throw Error(ErrorCode::dimension_mismatch, "mask length does not match the kernel rows");
    const Eigen::Index r = retained_rank;
    const Eigen::VectorXcd coeff = (u.leftCols(r).adjoint() * y).cwiseProduct(lambda.head(r).cast<cdouble>());
    return v.leftCols(r) * coeff;
  }

  /// Applies the inverse to every row of `masks` (I x M), giving I x N.
  Eigen::MatrixXcd apply_rows(const Eigen::MatrixXcd& masks) const {
    if (masks.cols() != u.rows())
      throw Error(ErrorCode::dimension_mismatch, "mask length does not match the kernel rows");
    const Eigen::Index r = retained_rank;
    // Row form of V diag(lambda) U^H y: y^T conj(U) diag(lambda) V^T.
    const Eigen::MatrixXcd coeff =
        (masks * u.leftCols(r).conjugate()) * lambda.head(r).cast<cdouble>().asDiagonal();
    return coeff * v.leftCols(r).transpose();
  }
};

inline Eigen::Index count_above(const Eigen::VectorXd& sigma, double relative) {
  if (sigma.size() == 0) return 0;
  const double cut = relative * sigma[0];
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma[i] > cut) ++n;
  return n;
}

/// Singular values of a kernel, descending.
inline Eigen::VectorXd singular_values(const KernelMatrix& kernel) {
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(kernel.entries);
  if (svd.info() != Eigen::Success) throw Error(ErrorCode::svd_failure, "SVD did not converge");
  return svd.singularValues();
}

inline RegularizedInverse tikhonov_inverse(const Eigen::MatrixXcd& kernel, double gamma,
                                           double threshold_factor = 1e-5,
                                           TruncationRule rule = TruncationRule::sigma_squared) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::invalid_config, "gamma must be > 0");
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(kernel, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw Error(ErrorCode::svd_failure, "SVD did not converge");
  RegularizedInverse inv;
  inv.u = svd.matrixU();
  inv.v = svd.matrixV();
  inv.sigma = svd.singularValues();
  if (!inv.sigma.allFinite()) throw Error(ErrorCode::svd_failure, "non-finite singular values");
  inv.gamma = gamma;
  inv.threshold_factor = threshold_factor;
  inv.rule = rule;
  inv.lambda = Eigen::VectorXd::Zero(inv.sigma.size());
  const double cut = threshold_factor * gamma;
  // Singular values are sorted, so the retained modes form a prefix.
  for (Eigen::Index i = 0; i < inv.sigma.size(); ++i) {
    const double s = inv.sigma[i];
    const double measure = rule == TruncationRule::sigma_squared ? s * s : s;
    if (measure < cut) break;
    inv.lambda[i] = s / (s * s + gamma);
    inv.retained_rank = i + 1;
  }
  return inv;
}

inline RegularizedInverse tikhonov_inverse(const KernelMatrix& kernel, double gamma,
                                           double threshold_factor = 1e-5,
                                           TruncationRule rule = TruncationRule::sigma_squared) {
  return tikhonov_inverse(kernel.entries, gamma, threshold_factor, rule);
}

/// Regularization weight by target distance: 1e-12 up to 3 m, 1e-14 up to
/// 5 m, 1e-15 beyond.
inline double default_gamma(double target_distance) {
  if (target_distance <= 3.0) return 1e-12;
  if (target_distance <= 5.0) return 1e-14;
  return 1e-15;
}

struct RisProfile {
  Eigen::VectorXcd p;       // sampled reflection coefficients, ||p||^2 = N P_I
  Eigen::Index index = 0;   // measurement index
  double raw_norm = 0.0;    // ||p~|| before power normalization
};

namespace detail {
inline Eigen::VectorXcd normalize_power(const Eigen::VectorXcd& raw, double amplification, double& norm) {
  norm = raw.norm();
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw Error(ErrorCode::zero_solution, "regularized solution has zero norm");
  return raw * (std::sqrt(static_cast<double>(raw.size()) * amplification) / norm);
}
}  // namespace detail

/// p = sqrt(N P_I) p~ / ||p~|| with p~ the regularized solution for one mask.
inline RisProfile synthesize(const RegularizedInverse& inv, const Eigen::VectorXcd& mask,
                             double amplification, Eigen::Index index = 0) {
  RisProfile out;
  out.index = index;
  out.p = detail::normalize_power(inv.apply(mask), amplification, out.raw_norm);
  return out;
}

/// Synthesizes RIS profiles for every ideal mask and records the field each
/// profile actually produces on the target.
inline MaskSet realize_masks(const KernelMatrix& kernel, const RegularizedInverse& inv, MaskSet masks,
                             double amplification, std::vector<double>* raw_norms = nullptr) {
  const bool kinds_match = (kernel.kind == KernelKind::z_2d && masks.kind == MaskKind::mask2d) ||
                           (kernel.kind == KernelKind::y_3d && masks.kind == MaskKind::mask3d);
  if (!kinds_match) throw Error(ErrorCode::kind_mismatch, "kernel kind does not match mask kind");
  if (masks.points() != kernel.rows())
    throw Error(ErrorCode::dimension_mismatch, "mask length does not match the kernel rows");
  Eigen::MatrixXcd raw = inv.apply_rows(masks.ideal);  // I x N
  if (raw_norms) raw_norms->assign(static_cast<std::size_t>(raw.rows()), 0.0);
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    double norm = 0.0;
    raw.row(i) = detail::normalize_power(raw.row(i).transpose(), amplification, norm).transpose();
    if (raw_norms) (*raw_norms)[static_cast<std::size_t>(i)] = norm;
  }
  masks.realized = raw * kernel.entries.transpose();  // row i = (K p_i)^T
  masks.profiles = std::move(raw);
  return masks;
}

/// Mean over measurements of the normalized inner product between realized
/// and ideal amplitude patterns.
inline double mean_amplitude_correlation(const MaskSet& masks) {
  if (!masks.realized) throw Error(ErrorCode::empty_mask_set, "no realized masks");
  const Eigen::MatrixXd a = masks.realized->cwiseAbs();
  const Eigen::MatrixXd b = masks.ideal.cwiseAbs();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double den = a.row(i).norm() * b.row(i).norm();
    sum += den > 0.0 ? a.row(i).dot(b.row(i)) / den : 0.0;
  }
  return sum / static_cast<double>(a.rows());
}

inline void save_profiles(const std::string& path, const MaskSet& masks) {
  if (!masks.profiles) throw Error(ErrorCode::empty_mask_set, "no RIS profiles to export");
  write_block_file(path,
                   {static_cast<std::uint32_t>(masks.kind), static_cast<std::uint64_t>(masks.profiles->rows()),
                    static_cast<std::uint64_t>(masks.profiles->cols()), masks.fingerprint},
                   *masks.profiles);
}

/// Text summary next to a profile export: rank, gamma, and ||p~|| per mask.
inline void write_profile_summary(const std::string& path, const RegularizedInverse& inv,
                                  const std::vector<double>& raw_norms) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  char buf[128];
  std::snprintf(buf, sizeof buf, "gamma = %.17g\n", inv.gamma);
  out << buf;
  std::snprintf(buf, sizeof buf, "threshold_factor = %.17g\n", inv.threshold_factor);
  out << buf;
  out << "truncation = " << (inv.rule == TruncationRule::sigma_squared ? "sigma_squared" : "sigma") << '\n';
  out << "retained_rank = " << inv.retained_rank << '\n';
  out << "measurements = " << raw_norms.size() << '\n';
  out << "# index raw_norm\n";
  for (std::size_t i = 0; i < raw_norms.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu %.17g\n", i, raw_norms[i]);
    out << buf;
  }
}

}  // namespace rismask
