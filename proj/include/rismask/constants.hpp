#pragma once

#include <cmath>
#include <complex>
#include <numbers>

namespace rismask {

using cdouble = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cdouble j_unit{0.0, 1.0};

// Free space.
inline constexpr double mu0 = 4.0e-7 * pi;              // H/m
inline constexpr double eps0 = 8.8541878128e-12;        // F/m
inline const double eta0 = std::sqrt(mu0 / eps0);       // ~376.730 Ohm
inline const double light_speed = 1.0 / std::sqrt(mu0 * eps0);

inline double wavenumber(double wavelength) { return 2.0 * pi / wavelength; }

inline double angular_frequency(double wavelength) {
  return 2.0 * pi * light_speed / wavelength;
}

inline double deg_to_rad(double deg) { return deg * pi / 180.0; }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline double watts_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

}  // namespace rismask
