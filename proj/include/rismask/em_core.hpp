#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "rismask/constants.hpp"
#include "rismask/errors.hpp"
#include "rismask/scene.hpp"

// Closed-form field quantities of the RIS -> target -> receiver chain. The
// time-harmonic convention is e^{-jkR} for outgoing waves everywhere, the
// scalar Green function included.

namespace rismask {

enum class KernelKind : std::uint32_t { z_2d = 0, y_3d = 1 };

inline const char* to_string(KernelKind kind) { return kind == KernelKind::z_2d ? "Z_2d" : "Y_3d"; }

/// Discretized propagation operator, rows = target samples, columns = RIS samples.
struct KernelMatrix {
  Eigen::MatrixXcd entries;
  KernelKind kind = KernelKind::z_2d;
  std::uint64_t fingerprint = 0;

  Eigen::Index rows() const { return entries.rows(); }
  Eigen::Index cols() const { return entries.cols(); }
};

struct KernelOptions {
  /// Upper bound on M*N; checked before anything is allocated.
  std::size_t max_entries = std::size_t{1} << 26;
  unsigned workers = 1;
};

using GreenTensor = Eigen::Matrix3cd;

/// Equivalent surface current J_x of the plane wave incident on the RIS (A/m),
/// before multiplication by the local reflection coefficient.
inline cdouble incident_current(const SceneConfig& c, const Point3& ris_point) {
  const double k = c.k();
  const double th = c.incident_elevation;
  return (2.0 * c.incident_amplitude / eta0) * std::cos(th) *
         std::exp(-j_unit * (k * std::sin(th) * ris_point.y));
}

/// Point spread function K from a target point to the receiver.
inline cdouble psf(const SceneConfig& c, const Point3& target_point) {
  const double k = c.k();
  const double r = distance(target_point, c.receiver);
  // k sqrt(mu) / (4 pi j sqrt(eps)) = k eta / (4 pi j)
  return (k * eta0 / (4.0 * pi * j_unit)) * std::exp(-j_unit * (k * r)) / r;
}

/// Dyadic free-space Green function (I + grad grad / k^2) g, g = e^{-jkR}/(4 pi R).
inline GreenTensor green_tensor(const Point3& r_r, const Point3& r_src, double k) {
  const Eigen::Vector3d d(r_r.x - r_src.x, r_r.y - r_src.y, r_r.z - r_src.z);
  const double r = d.norm();
  if (!(r > 0.0)) throw Error(ErrorCode::coincident_points, "green_tensor needs r_r != r'");
  const Eigen::Vector3d u = d / r;
  const double kr = k * r;
  const cdouble g = std::exp(-j_unit * kr) / (4.0 * pi * r);
  const cdouble a = 3.0 / (kr * kr) + 3.0 * j_unit / kr - 1.0;
  const cdouble b = 1.0 / (kr * kr) + j_unit / kr - 1.0;
  GreenTensor out = (a * (u * u.transpose()).cast<cdouble>() - b * GreenTensor::Identity()) * g;
  return out;
}

namespace detail {

/// Geometric factors of E_out for one RIS sample seen from one target point,
/// without the common -j eta/(4 pi k) J_x e^{-jkR} prefactor.
struct EoutTerms {
  cdouble tx, ty, tz;
  cdouble phase;  // e^{-jkR}
};

inline EoutTerms eout_terms(const Point3& tgt, const Point3& ris, double k) {
  const double dx = tgt.x - ris.x;
  const double dy = tgt.y - ris.y;
  const double dz = tgt.z - ris.z;
  const double r2 = dx * dx + dy * dy + dz * dz;
  const double r = std::sqrt(r2);
  const double kr = k * r;
  const double r3 = r2 * r;
  const double r5 = r3 * r2;
  const cdouble near = cdouble(-1.0 + kr * kr, -kr) / r3;
  const cdouble cross = cdouble(3.0 - kr * kr, 3.0 * kr) / r5;
  return {near + cross * (dx * dx), cross * (dy * dx), cross * (dz * dx), std::exp(-j_unit * kr)};
}

template <class RowFn>
void parallel_rows(Eigen::Index rows, unsigned workers, RowFn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<Eigen::Index>(rows, 1))));
  if (workers == 1) {
    fn(Eigen::Index{0}, rows);
    return;
  }
  std::vector<std::jthread> pool;
  const Eigen::Index chunk = (rows + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const Eigen::Index begin = w * chunk;
    const Eigen::Index end = std::min(rows, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
}

inline void check_kernel_size(std::size_t m, std::size_t n, const KernelOptions& opt) {
  if (m == 0 || n == 0) throw Error(ErrorCode::sizing, "empty kernel");
  if (m > opt.max_entries / n)
    throw Error(ErrorCode::sizing, "kernel of " + std::to_string(m) + "x" + std::to_string(n) +
                                       " exceeds the configured cap of " +
                                       std::to_string(opt.max_entries) + " entries");
}

}  // namespace detail

/// Fills rows [row_begin, row_end) of a Z kernel. Rows are independent, so
/// assembly may be split into chunks or resumed.
inline void assemble_rows_2d(const SceneConfig& c, const SampleGrids& g, Eigen::MatrixXcd& z,
                             Eigen::Index row_begin, Eigen::Index row_end) {
  const double k = c.k();
  const double area = g.ris_cell_area();
  const Eigen::Index n_ris = static_cast<Eigen::Index>(g.ris_points.size());
  std::vector<cdouble> current(static_cast<std::size_t>(n_ris));
  for (Eigen::Index n = 0; n < n_ris; ++n) current[n] = incident_current(c, g.ris_points[n]);
  for (Eigen::Index m = row_begin; m < row_end; ++m) {
    const Point3& t = g.target_points[m];
    for (Eigen::Index n = 0; n < n_ris; ++n) {
      const Point3& s = g.ris_points[n];
      const double dx = t.x - s.x, dy = t.y - s.y, dz = t.z - s.z;
      const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
      const cdouble radial = cdouble(1.0, k * r) / (4.0 * pi * r * r * r);
      z(m, n) = -radial * area * t.z * current[n] * std::exp(-j_unit * (k * r));
    }
  }
}

/// Fills rows [row_begin, row_end) of a Y kernel (3D coefficient B).
inline void assemble_rows_3d(const SceneConfig& c, const SampleGrids& g, Eigen::MatrixXcd& y,
                             Eigen::Index row_begin, Eigen::Index row_end) {
  const double k = c.k();
  const double area = g.ris_cell_area();
  const cdouble pref = -j_unit * eta0 / (4.0 * pi * k);
  const Eigen::Index n_ris = static_cast<Eigen::Index>(g.ris_points.size());
  std::vector<cdouble> current(static_cast<std::size_t>(n_ris));
  for (Eigen::Index n = 0; n < n_ris; ++n) current[n] = incident_current(c, g.ris_points[n]);
  for (Eigen::Index m = row_begin; m < row_end; ++m) {
    const Point3& t = g.target_points[m];
    const GreenTensor gt = green_tensor(c.receiver, t, k);
    const cdouble gxx = gt(0, 0), gxy = gt(0, 1), gxz = gt(0, 2);
    for (Eigen::Index n = 0; n < n_ris; ++n) {
      const auto e = detail::eout_terms(t, g.ris_points[n], k);
      y(m, n) = area * pref * current[n] * e.phase * (gxx * e.tx + gxy * e.ty + gxz * e.tz);
    }
  }
}

inline KernelMatrix kernel_2d(const ValidatedScene& scene, const SampleGrids& g,
                              const KernelOptions& opt = {}) {
  const auto& c = scene.config();
  if (c.target_kind != TargetKind::plane2d)
    throw Error(ErrorCode::kind_mismatch, "kernel_2d needs a plane2d scene");
  detail::check_kernel_size(g.target_points.size(), g.ris_points.size(), opt);
  KernelMatrix km;
  km.kind = KernelKind::z_2d;
  km.fingerprint = scene_fingerprint(c);
  km.entries.resize(static_cast<Eigen::Index>(g.target_points.size()),
                    static_cast<Eigen::Index>(g.ris_points.size()));
  detail::parallel_rows(km.rows(), opt.workers, [&](Eigen::Index b, Eigen::Index e) {
    assemble_rows_2d(c, g, km.entries, b, e);
  });
  return km;
}

inline KernelMatrix kernel_3d(const ValidatedScene& scene, const SampleGrids& g,
                              const KernelOptions& opt = {}) {
  const auto& c = scene.config();
  if (c.target_kind != TargetKind::volume3d)
    throw Error(ErrorCode::kind_mismatch, "kernel_3d needs a volume3d scene");
  detail::check_kernel_size(g.target_points.size(), g.ris_points.size(), opt);
  KernelMatrix km;
  km.kind = KernelKind::y_3d;
  km.fingerprint = scene_fingerprint(c);
  km.entries.resize(static_cast<Eigen::Index>(g.target_points.size()),
                    static_cast<Eigen::Index>(g.ris_points.size()));
  detail::parallel_rows(km.rows(), opt.workers, [&](Eigen::Index b, Eigen::Index e) {
    assemble_rows_3d(c, g, km.entries, b, e);
  });
  return km;
}

/// Kernel matching the scene's target kind.
inline KernelMatrix assemble_kernel(const ValidatedScene& scene, const SampleGrids& g,
                                    const KernelOptions& opt = {}) {
  return scene->target_kind == TargetKind::plane2d ? kernel_2d(scene, g, opt)
                                                   : kernel_3d(scene, g, opt);
}

/// Field produced on the target samples by RIS coefficients p (y = Z p, b = Y p).
inline Eigen::VectorXcd h_out_y(const KernelMatrix& kernel, const Eigen::VectorXcd& p) {
  if (p.size() != kernel.cols())
    throw Error(ErrorCode::dimension_mismatch, "coefficient vector has length " +
                                                   std::to_string(p.size()) + ", kernel has " +
                                                   std::to_string(kernel.cols()) + " columns");
  return kernel.entries * p;
}

/// E_out = (E_x, E_y, E_z) radiated by the RIS at one point, summed over the
/// RIS samples with cell weights.
inline Eigen::Vector3cd e_out_components(const SceneConfig& c, const SampleGrids& g,
                                         const Eigen::VectorXcd& p, const Point3& target_point) {
  if (p.size() != static_cast<Eigen::Index>(g.ris_points.size()))
    throw Error(ErrorCode::dimension_mismatch, "coefficient vector length differs from RIS samples");
  const double k = c.k();
  const cdouble pref = -j_unit * eta0 / (4.0 * pi * k) * g.ris_cell_area();
  Eigen::Vector3cd sum = Eigen::Vector3cd::Zero();
  for (Eigen::Index n = 0; n < p.size(); ++n) {
    if (p[n] == cdouble{}) continue;
    const auto e = detail::eout_terms(target_point, g.ris_points[n], k);
    const cdouble w = pref * incident_current(c, g.ris_points[n]) * e.phase * p[n];
    sum += w * Eigen::Vector3cd(e.tx, e.ty, e.tz);
  }
  return sum;
}

}  // namespace rismask
