#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rismask/constants.hpp"
#include "rismask/errors.hpp"
#include "rismask/measurement.hpp"
#include "rismask/scene.hpp"

namespace rismask {

/// Grayscale raster, row-major with row 0 first (as stored in a PGM).
struct GrayImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<int> pixels;

  int at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

/// Whitespace-separated tokens with `#` comments stripped to end of line.
inline std::vector<std::string> tokenize(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
  }
  return out;
}

inline long parse_long(const std::string& tok, ErrorCode code, const std::string& what) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(tok, &used);
  } catch (const std::logic_error&) {
    throw Error(code, what + ": '" + tok + "' is not an integer");
  }
  if (used != tok.size()) throw Error(code, what + ": '" + tok + "' is not an integer");
  return v;
}

inline double parse_number(const std::string& tok, ErrorCode code, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::logic_error&) {
    throw Error(code, what + ": '" + tok + "' is not a number");
  }
  if (used != tok.size()) throw Error(code, what + ": '" + tok + "' is not a number");
  return v;
}

}  // namespace detail

inline GrayImage read_pgm(std::istream& in) {
  const auto tok = detail::tokenize(in);
  if (tok.size() < 4 || tok[0] != "P2") throw Error(ErrorCode::malformed_image, "not an ASCII PGM (P2)");
  GrayImage img;
  img.width = static_cast<int>(detail::parse_long(tok[1], ErrorCode::malformed_image, "width"));
  img.height = static_cast<int>(detail::parse_long(tok[2], ErrorCode::malformed_image, "height"));
  img.maxval = static_cast<int>(detail::parse_long(tok[3], ErrorCode::malformed_image, "maxval"));
  if (img.width < 1 || img.height < 1 || img.maxval < 1 || img.maxval > 65535)
    throw Error(ErrorCode::malformed_image, "bad PGM header");
  const std::size_t count = static_cast<std::size_t>(img.width) * img.height;
  if (tok.size() != 4 + count)
    throw Error(ErrorCode::malformed_image, "expected " + std::to_string(count) + " pixels, found " +
                                                std::to_string(tok.size() - 4));
  img.pixels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const long v = detail::parse_long(tok[4 + i], ErrorCode::malformed_image, "pixel");
    if (v < 0 || v > img.maxval) throw Error(ErrorCode::malformed_image, "pixel outside 0..maxval");
    img.pixels.push_back(static_cast<int>(v));
  }
  return img;
}

inline GrayImage read_pgm_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  return read_pgm(in);
}

inline void write_pgm(std::ostream& out, const GrayImage& img) {
  out << "P2\n" << img.width << ' ' << img.height << '\n' << img.maxval << '\n';
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) out << (x ? " " : "") << img.at(x, y);
    out << '\n';
  }
}

inline void write_pgm_file(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  write_pgm(out, img);
}

/// Image row 0 is the top, grid row 0 is y = -b'/2; rows are flipped so the
/// image looks the same way up as the target plane seen from the RIS.
inline Eigen::VectorXd binarize_to_grid(const GrayImage& img, int nx, int ny, bool resample = true) {
  if (!resample && (img.width != nx || img.height != ny))
    throw Error(ErrorCode::size_mismatch, "image is " + std::to_string(img.width) + "x" +
                                              std::to_string(img.height) + ", grid is " + std::to_string(nx) +
                                              "x" + std::to_string(ny));
  Eigen::VectorXd out(static_cast<Eigen::Index>(nx) * ny);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      const int sx = std::min(img.width - 1, static_cast<int>((ix + 0.5) * img.width / nx));
      const int sy = std::min(img.height - 1, static_cast<int>((iy + 0.5) * img.height / ny));
      const int v = img.at(sx, img.height - 1 - sy);
      out[static_cast<Eigen::Index>(iy) * nx + ix] = 2 * v >= img.maxval ? 1.0 : 0.0;
    }
  return out;
}

inline TargetModel load_target_2d(const std::string& path, int nx, int ny, bool resample = true,
                                  cdouble reflection = {-1.0, 0.0}) {
  return TargetModel::plane(nx, ny, binarize_to_grid(read_pgm_file(path), nx, ny, resample), reflection);
}

/// Grid values rendered as a PGM, mapped linearly from [lo, hi] to 0..255
/// (clamped). Grid row 0 goes to the bottom of the image.
inline GrayImage grid_to_image(const Eigen::VectorXd& values, int nx, int ny, double lo, double hi) {
  GrayImage img;
  img.width = nx;
  img.height = ny;
  img.maxval = 255;
  img.pixels.assign(static_cast<std::size_t>(nx) * ny, 0);
  const double span = hi - lo;
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      const double v = values[static_cast<Eigen::Index>(iy) * nx + ix];
      double t = span > 0.0 ? (v - lo) / span : 0.0;
      t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
      img.pixels[static_cast<std::size_t>(ny - 1 - iy) * nx + ix] = static_cast<int>(std::lround(255.0 * t));
    }
  return img;
}

/// Uses the grid's own min/max; a constant grid maps to 0.
inline GrayImage grid_to_image(const Eigen::VectorXd& values, int nx, int ny) {
  if (values.size() == 0) return grid_to_image(values, nx, ny, 0.0, 0.0);
  return grid_to_image(values, nx, ny, values.minCoeff(), values.maxCoeff());
}

/// Volume text format: `nx ny nz`, then nx*ny*nz pairs `eps_r sigma` in
/// grid order (x fastest, then y, then z). `#` starts a comment.
inline TargetModel read_volume(std::istream& in, double wavelength) {
  const auto tok = detail::tokenize(in);
  if (tok.size() < 3) throw Error(ErrorCode::malformed_volume, "missing nx ny nz header");
  const long nx = detail::parse_long(tok[0], ErrorCode::malformed_volume, "nx");
  const long ny = detail::parse_long(tok[1], ErrorCode::malformed_volume, "ny");
  const long nz = detail::parse_long(tok[2], ErrorCode::malformed_volume, "nz");
  if (nx < 1 || ny < 1 || nz < 1) throw Error(ErrorCode::malformed_volume, "volume sizes must be >= 1");
  const std::size_t count = static_cast<std::size_t>(nx * ny * nz);
  if (tok.size() != 3 + 2 * count)
    throw Error(ErrorCode::malformed_volume,
                "expected " + std::to_string(count) + " (eps_r, sigma) pairs");
  Eigen::VectorXcd chi(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    const double eps_r = detail::parse_number(tok[3 + 2 * i], ErrorCode::malformed_volume, "eps_r");
    const double sigma = detail::parse_number(tok[4 + 2 * i], ErrorCode::malformed_volume, "sigma");
    if (!(eps_r >= 1.0) || !(sigma >= 0.0) || !std::isfinite(eps_r) || !std::isfinite(sigma))
      throw Error(ErrorCode::malformed_volume, "voxel needs eps_r >= 1 and sigma >= 0");
    chi[static_cast<Eigen::Index>(i)] = contrast_from_material(eps_r, sigma, wavelength);
  }
  return TargetModel::volume(static_cast<int>(nx), static_cast<int>(ny), static_cast<int>(nz), std::move(chi));
}

inline TargetModel load_target_3d(const std::string& path, double wavelength) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  return read_volume(in, wavelength);
}

// ---------------------------------------------------------------------------
// Built-in targets
// ---------------------------------------------------------------------------

namespace detail {
// 14 x 7, top row first.
inline const char* const seu_raster[] = {
    "####.####.#..#",
    "#....#....#..#",
    "#....#....#..#",
    "####.###..#..#",
    "...#.#....#..#",
    "...#.#....#..#",
    "####.####.####",
};
inline constexpr int seu_width = 14;
inline constexpr int seu_height = 7;

/// Letter index (0 = S, 1 = E, 2 = U) of a raster column.
inline int seu_letter(int col) { return col < 5 ? 0 : (col < 10 ? 1 : 2); }

/// Places the raster on an nx x ny grid: centered when it fits, nearest
/// neighbor scaled down otherwise. Returns the letter index per cell or -1.
inline std::vector<int> seu_layout(int nx, int ny) {
  std::vector<int> out(static_cast<std::size_t>(nx) * ny, -1);
  const bool fits = nx >= seu_width && ny >= seu_height;
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      int col = 0, row = 0;
      if (fits) {
        col = ix - (nx - seu_width) / 2;
        row = (ny - 1 - iy) - (ny - seu_height) / 2;
        if (col < 0 || col >= seu_width || row < 0 || row >= seu_height) continue;
      } else {
        col = std::min(seu_width - 1, (ix * seu_width) / nx);
        row = std::min(seu_height - 1, ((ny - 1 - iy) * seu_height) / ny);
      }
      if (seu_raster[row][col] == '#') out[static_cast<std::size_t>(iy) * nx + ix] = seu_letter(col);
    }
  return out;
}
}  // namespace detail

inline std::vector<std::string> builtin_target_names() { return {"block", "checkerboard", "letters-seu"}; }

inline bool is_builtin_target(const std::string& name) {
  const auto names = builtin_target_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

/// Occupancy of a built-in 2D pattern: `block` is the central half of the
/// grid, `checkerboard` alternates squares of side max(1, nx/4), and
/// `letters-seu` is a coarse raster of the letters S, E, U.
inline Eigen::VectorXd builtin_occupancy(const std::string& name, int nx, int ny) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nx) * ny);
  if (name == "block") {
    const int x0 = nx / 4, x1 = nx - nx / 4, y0 = ny / 4, y1 = ny - ny / 4;
    for (int iy = y0; iy < y1; ++iy)
      for (int ix = x0; ix < x1; ++ix) out[static_cast<Eigen::Index>(iy) * nx + ix] = 1.0;
  } else if (name == "checkerboard") {
    const int side = std::max(1, nx / 4);
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix)
        out[static_cast<Eigen::Index>(iy) * nx + ix] = ((ix / side + iy / side) % 2 == 0) ? 1.0 : 0.0;
  } else if (name == "letters-seu") {
    const auto layout = detail::seu_layout(nx, ny);
    for (std::size_t i = 0; i < layout.size(); ++i) out[static_cast<Eigen::Index>(i)] = layout[i] >= 0 ? 1.0 : 0.0;
  } else {
    throw Error(ErrorCode::invalid_config, "unknown built-in target '" + name + "'");
  }
  return out;
}

/// 3D built-ins extrude the 2D pattern through every z slice. For
/// letters-seu each letter gets its own material (eps_r 2, 3, 2.5 with
/// sigma 0, 0, 0.01 S/m); the other patterns use eps_r = 2.
inline Eigen::VectorXcd builtin_contrast(const std::string& name, int nx, int ny, int nz, double wavelength) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(nx) * ny * nz);
  const Eigen::Index plane = static_cast<Eigen::Index>(nx) * ny;
  if (name == "letters-seu") {
    const cdouble chi[3] = {contrast_from_material(2.0, 0.0, wavelength),
                            contrast_from_material(3.0, 0.0, wavelength),
                            contrast_from_material(2.5, 0.01, wavelength)};
    const auto layout = detail::seu_layout(nx, ny);
    for (int iz = 0; iz < nz; ++iz)
      for (Eigen::Index i = 0; i < plane; ++i)
        if (layout[static_cast<std::size_t>(i)] >= 0) out[iz * plane + i] = chi[layout[static_cast<std::size_t>(i)]];
  } else {
    const Eigen::VectorXd occ = builtin_occupancy(name, nx, ny);
    const cdouble chi = contrast_from_material(2.0, 0.0, wavelength);
    for (int iz = 0; iz < nz; ++iz)
      for (Eigen::Index i = 0; i < plane; ++i)
        if (occ[i] != 0.0) out[iz * plane + i] = chi;
  }
  return out;
}

/// Resolves a target spec against the scene: a built-in name, a `.pgm`
/// image (plane2d) or a volume text file (volume3d).
inline TargetModel make_target(const ValidatedScene& scene, const std::string& spec, bool resample = true) {
  const auto& c = scene.config();
  if (c.target_kind == TargetKind::plane2d) {
    if (is_builtin_target(spec))
      return TargetModel::plane(c.target_nx, c.target_ny, builtin_occupancy(spec, c.target_nx, c.target_ny),
                                c.reflection_coeff);
    return load_target_2d(spec, c.target_nx, c.target_ny, resample, c.reflection_coeff);
  }
  if (is_builtin_target(spec))
    return TargetModel::volume(c.target_nx, c.target_ny, c.target_nz,
                               builtin_contrast(spec, c.target_nx, c.target_ny, c.target_nz, c.wavelength));
  auto t = load_target_3d(spec, c.wavelength);
  check_target_matches(scene, t);
  return t;
}

}  // namespace rismask
