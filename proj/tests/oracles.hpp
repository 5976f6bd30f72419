#pragma once

// Scalar reference implementations used only by tests. They are written
// directly from the field formulas and share no code with the library
// beyond the point/config structs.

#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "rismask/scene.hpp"

namespace oracle {

using cd = std::complex<double>;
constexpr double pi_ = 3.14159265358979323846;
constexpr cd jj{0.0, 1.0};

inline double eta() {
  const double mu = 4e-7 * pi_;
  const double eps = 8.8541878128e-12;
  return std::sqrt(mu / eps);
}

inline double dist(const rismask::Point3& a, const rismask::Point3& b) {
  return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
}

inline cd current_x(const rismask::SceneConfig& c, double y) {
  const double k = 2.0 * pi_ / c.wavelength;
  return 2.0 * c.incident_amplitude / eta() * std::cos(c.incident_elevation) *
         std::exp(cd(0.0, -k * std::sin(c.incident_elevation) * y));
}

/// H_out^y at target point t from a unit coefficient at RIS point s.
inline cd z_entry(const rismask::SceneConfig& c, const rismask::Point3& t, const rismask::Point3& s,
                  double cell_area) {
  const double k = 2.0 * pi_ / c.wavelength;
  const double r = dist(t, s);
  const cd num = -(1.0 + jj * k * r);
  return num / (4.0 * pi_ * r * r * r) * cell_area * t.z * current_x(c, s.y) * std::exp(-jj * k * r);
}

/// K = k eta / (4 pi j) e^{-jkR'} / R'.
inline cd psf(const rismask::SceneConfig& c, const rismask::Point3& t) {
  const double k = 2.0 * pi_ / c.wavelength;
  const double r = dist(t, c.receiver);
  return k * eta() / (4.0 * pi_ * jj) * std::exp(-jj * k * r) / r;
}

/// Dyadic Green entry (i, j) from the closed form.
inline cd green(const rismask::Point3& rr, const rismask::Point3& rs, double k, int i, int j) {
  const double d[3] = {rr.x - rs.x, rr.y - rs.y, rr.z - rs.z};
  const double r = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
  const double kr = k * r;
  const cd g = std::exp(-jj * kr) / (4.0 * pi_ * r);
  const cd a = 3.0 / (kr * kr) + 3.0 * jj / kr - 1.0;
  const cd b = 1.0 / (kr * kr) + jj / kr - 1.0;
  return (a * d[i] * d[j] / (r * r) - (i == j ? b : cd{})) * g;
}

/// (I + grad grad / k^2) g by central differences in the receiver point.
inline Eigen::Matrix3cd green_fd(const rismask::Point3& rr, const rismask::Point3& rs, double k, double h) {
  auto g = [&](double dx, double dy, double dz) {
    const double r = std::hypot(rr.x + dx - rs.x, rr.y + dy - rs.y, rr.z + dz - rs.z);
    return std::exp(-jj * k * r) / (4.0 * pi_ * r);
  };
  auto shift = [h](int axis, double s) {
    double v[3] = {0, 0, 0};
    v[axis] = s * h;
    return std::array<double, 3>{v[0], v[1], v[2]};
  };
  Eigen::Matrix3cd out;
  const cd g0 = g(0, 0, 0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      cd d2;
      if (i == j) {
        const auto p = shift(i, 1.0), m = shift(i, -1.0);
        d2 = (g(p[0], p[1], p[2]) - 2.0 * g0 + g(m[0], m[1], m[2])) / (h * h);
      } else {
        auto at = [&](double si, double sj) {
          double v[3] = {0, 0, 0};
          v[i] = si * h;
          v[j] = sj * h;
          return g(v[0], v[1], v[2]);
        };
        d2 = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h * h);
      }
      out(i, j) = (i == j ? g0 : cd{}) + d2 / (k * k);
    }
  return out;
}

/// E_out components at t from a unit coefficient at RIS point s.
inline std::array<cd, 3> e_out(const rismask::SceneConfig& c, const rismask::Point3& t, const rismask::Point3& s,
                               double cell_area) {
  const double k = 2.0 * pi_ / c.wavelength;
  const double xd = t.x - s.x, yd = t.y - s.y, zd = t.z - s.z;
  const double r = std::sqrt(xd * xd + yd * yd + zd * zd);
  const cd pref = -jj * eta() / (4.0 * pi_ * k) * current_x(c, s.y) * std::exp(-jj * k * r) * cell_area;
  const cd a = (-1.0 - jj * k * r + k * k * r * r) / std::pow(r, 3);
  const cd b = (3.0 + 3.0 * jj * k * r - k * k * r * r) / std::pow(r, 5);
  return {pref * (a + b * xd * xd), pref * b * yd * xd, pref * b * zd * xd};
}

/// B at voxel t from a unit coefficient at RIS point s: x row of G times E_out.
inline cd y_entry(const rismask::SceneConfig& c, const rismask::Point3& t, const rismask::Point3& s,
                  double cell_area) {
  const double k = 2.0 * pi_ / c.wavelength;
  const auto e = e_out(c, t, s, cell_area);
  cd sum{};
  for (int j = 0; j < 3; ++j) sum += green(c.receiver, t, k, 0, j) * e[j];
  return sum;
}

/// Regularized least squares through the normal equations, in long double:
/// K^H K + gamma I reaches condition ~1e8 for gamma = 1e-6.
inline Eigen::VectorXcd tikhonov_normal(const Eigen::MatrixXcd& k, const Eigen::VectorXcd& y, double gamma) {
  using cld = std::complex<long double>;
  using MatL = Eigen::Matrix<cld, Eigen::Dynamic, Eigen::Dynamic>;
  using VecL = Eigen::Matrix<cld, Eigen::Dynamic, 1>;
  const MatL kl = k.cast<cld>();
  const MatL a = kl.adjoint() * kl + static_cast<long double>(gamma) * MatL::Identity(k.cols(), k.cols());
  const VecL p = a.ldlt().solve(kl.adjoint() * y.cast<cld>());
  return p.cast<cd>();
}

/// Loop-by-loop 2D forward model and correlation reconstruction.
inline std::vector<double> forward_reconstruct_2d(const std::vector<std::vector<cd>>& masks,
                                                  const std::vector<cd>& psf_values,
                                                  const std::vector<double>& truth, cd reflection, double area) {
  const std::size_t count = masks.size(), points = truth.size();
  std::vector<double> mag(count);
  for (std::size_t i = 0; i < count; ++i) {
    cd e{};
    for (std::size_t m = 0; m < points; ++m) e += psf_values[m] * truth[m] * (1.0 - reflection) * masks[i][m] * area;
    mag[i] = std::abs(e);
  }
  double mean = 0.0;
  for (double v : mag) mean += v / count;
  std::vector<double> out(points);
  for (std::size_t m = 0; m < points; ++m) {
    double mu = 0.0, var = 0.0, corr = 0.0;
    for (std::size_t i = 0; i < count; ++i) mu += std::abs(masks[i][m]) / count;
    for (std::size_t i = 0; i < count; ++i) {
      const double u = std::abs(masks[i][m]);
      var += (u - mu) * (u - mu) / count;
      corr += (mag[i] - mean) * u;
    }
    out[m] = corr / (count * var * std::abs(psf_values[m]));
  }
  return out;
}

}  // namespace oracle
