#pragma once

#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rismask/binary_io.hpp"
#include "rismask/config.hpp"
#include "rismask/em_core.hpp"
#include "rismask/errors.hpp"
#include "rismask/mask_design.hpp"
#include "rismask/measurement.hpp"
#include "rismask/random.hpp"
#include "rismask/reconstruct.hpp"
#include "rismask/ris_synthesis.hpp"
#include "rismask/scene.hpp"
#include "rismask/targets.hpp"

namespace rismask {

/// Everything a run needs besides the scene: target, sweep axes and the
/// knobs of each pipeline stage.
struct ExperimentPlan {
  SceneConfig scene;
  std::string target = "letters-seu";
  std::vector<std::int64_t> measurements{256};
  std::vector<double> snr_db{20.0};
  std::vector<double> z_prime;  // empty: the scene's own target_distance
  std::optional<double> gamma;  // empty: default_gamma(z')
  double threshold_factor = 1e-5;
  TruncationRule truncation = TruncationRule::sigma_squared;
  std::uint64_t seed = 1;
  Calibration calibration = Calibration::max1;
  NoiseMode noise_mode = NoiseMode::relative;
  double noise_dbm = -114.0;  // absolute mode
  bool ideal_masks = false;
  PhaseRule phase_rule = PhaseRule::taylor;
  bool keep_artifacts = false;
  unsigned workers = 1;
  bool timing = false;
  bool diagnostic = false;  // NMSE over unflagged points only
  bool resample = true;     // nearest-neighbor resampling of image targets
  std::string kernel_cache;  // directory for kernel files, empty = memory only

  std::vector<double> z_values() const {
    return z_prime.empty() ? std::vector<double>{scene.target_distance} : z_prime;
  }
};

inline ExperimentPlan plan_from_keys(const KeyValues& kv, ExperimentPlan base = {}) {
  ExperimentPlan p = std::move(base);
  p.scene = scene_from_keys(kv, p.scene);
  p.target = kv.get_string("target", p.target);
  p.measurements = kv.get_int_list("measurements", p.measurements);
  p.snr_db = kv.get_double_list("snr_db", p.snr_db);
  p.z_prime = kv.get_double_list("z_prime", p.z_prime);
  if (kv.contains("gamma")) {
    const auto g = kv.get_string("gamma", "");
    if (g == "auto") p.gamma.reset();
    else p.gamma = kv.get_double("gamma", 0.0);
  }
  p.threshold_factor = kv.get_double("threshold_factor", p.threshold_factor);
  if (kv.contains("truncation")) {
    const auto t = kv.get_string("truncation", "");
    if (t == "sigma_squared") p.truncation = TruncationRule::sigma_squared;
    else if (t == "sigma") p.truncation = TruncationRule::sigma;
    else throw Error(ErrorCode::invalid_config, "truncation must be sigma_squared or sigma");
  }
  p.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(p.seed)));
  if (kv.contains("calibration")) p.calibration = parse_calibration(kv.get_string("calibration", ""));
  if (kv.contains("noise_mode")) {
    const auto m = kv.get_string("noise_mode", "");
    if (m == "relative") p.noise_mode = NoiseMode::relative;
    else if (m == "absolute") p.noise_mode = NoiseMode::absolute;
    else throw Error(ErrorCode::invalid_config, "noise_mode must be relative or absolute");
  }
  p.noise_dbm = kv.get_double("noise_dbm", p.noise_dbm);
  p.ideal_masks = kv.get_bool("ideal_masks", p.ideal_masks);
  if (kv.contains("phase_rule")) {
    const auto r = kv.get_string("phase_rule", "");
    if (r == "taylor") p.phase_rule = PhaseRule::taylor;
    else if (r == "exact") p.phase_rule = PhaseRule::exact;
    else throw Error(ErrorCode::invalid_config, "phase_rule must be taylor or exact");
  }
  p.keep_artifacts = kv.get_bool("keep_artifacts", p.keep_artifacts);
  const auto workers = kv.get_int("workers", p.workers);
  if (workers < 1) throw Error(ErrorCode::invalid_config, "workers must be >= 1");
  p.workers = static_cast<unsigned>(workers);
  p.timing = kv.get_bool("timing", p.timing);
  p.diagnostic = kv.get_bool("diagnostic", p.diagnostic);
  p.resample = kv.get_bool("resample", p.resample);
  p.kernel_cache = kv.get_string("kernel_cache", p.kernel_cache);
  return p;
}

namespace detail {
template <class T>
std::string join_list(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    if constexpr (std::is_floating_point_v<T>) s += fmt_double(v[i]);
    else s += std::to_string(v[i]);
  }
  return s;
}
}  // namespace detail

/// Resolved plan as `key = value` text (scene keys first); parsing it back
/// gives the same plan.
inline std::string plan_to_text(const ExperimentPlan& p) {
  using detail::fmt_double;
  std::string s = scene_to_text(p.scene);
  auto put = [&s](const char* key, const std::string& value) {
    s += key;
    s += " = ";
    s += value;
    s += '\n';
  };
  put("target", p.target);
  put("measurements", detail::join_list(p.measurements));
  put("snr_db", detail::join_list(p.snr_db));
  put("z_prime", detail::join_list(p.z_values()));
  put("gamma", p.gamma ? fmt_double(*p.gamma) : "auto");
  put("threshold_factor", fmt_double(p.threshold_factor));
  put("truncation", p.truncation == TruncationRule::sigma_squared ? "sigma_squared" : "sigma");
  put("seed", std::to_string(p.seed));
  put("calibration", to_string(p.calibration));
  put("noise_mode", to_string(p.noise_mode));
  put("noise_dbm", fmt_double(p.noise_dbm));
  put("ideal_masks", p.ideal_masks ? "true" : "false");
  put("phase_rule", p.phase_rule == PhaseRule::taylor ? "taylor" : "exact");
  put("keep_artifacts", p.keep_artifacts ? "true" : "false");
  put("diagnostic", p.diagnostic ? "true" : "false");
  put("resample", p.resample ? "true" : "false");
  return s;
}

/// Checks that every sweep list is nonempty and every I is a valid mask count.
inline void validate_plan(const ExperimentPlan& p) {
  if (p.measurements.empty() || p.snr_db.empty() || p.z_values().empty())
    throw Error(ErrorCode::invalid_config, "sweep lists must be nonempty");
  if (p.gamma && !(*p.gamma > 0.0)) throw Error(ErrorCode::invalid_config, "gamma must be > 0");
  const std::int64_t m = p.scene.n_target();
  for (const auto i : p.measurements) {
    if (!is_power_of_two(i) || i < 2)
      throw Error(ErrorCode::unsupported_order, "I = " + std::to_string(i) + " is not a power of two >= 2");
    const std::int64_t need = p.scene.target_kind == TargetKind::plane2d ? m + 1 : m;
    if (i < need)
      throw Error(ErrorCode::insufficient_measurements,
                  "I = " + std::to_string(i) + " < " + std::to_string(need) + " for M = " + std::to_string(m));
  }
}

/// Noise seed of one sweep point, a fixed mix of the plan seed and the point's
/// coordinates so it does not depend on sweep order or worker count.
inline std::uint64_t point_seed(std::uint64_t seed, std::int64_t measurements, double snr_db, double z) {
  std::uint64_t h = SplitMix64::mix(seed);
  h = SplitMix64::mix(h ^ static_cast<std::uint64_t>(measurements));
  h = SplitMix64::mix(h ^ std::bit_cast<std::uint64_t>(snr_db));
  h = SplitMix64::mix(h ^ std::bit_cast<std::uint64_t>(z));
  return h;
}

struct PointResult {
  std::int64_t measurements = 0;
  double snr_db = 0.0;
  double z_prime = 0.0;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> nmse;
  std::optional<Eigen::Index> retained_rank;
  std::optional<double> wall_ms;
  std::optional<ErrorCode> error;
  std::string message;
  Eigen::VectorXcd estimate;  // calibrated
  MeasurementSet records;
};

/// Per-geometry state shared by every sweep point at one z': scene, grids,
/// kernel and its regularized inverse, PSF magnitudes and the target.
struct Geometry {
  ValidatedScene scene;
  SampleGrids grids;
  std::optional<KernelMatrix> kernel;
  std::optional<RegularizedInverse> inverse;
  Eigen::VectorXd psf_abs;
  TargetModel target;
  double gamma = 0.0;
};

/// Sweep-point evaluator with caches keyed by scene fingerprint (geometry)
/// and by (fingerprint, I) for masks. `prepare` fills caches; `evaluate`
/// only reads them and is safe to call from several threads.
class Pipeline {
 public:
  explicit Pipeline(ExperimentPlan plan) : plan_(std::move(plan)) {}

  const ExperimentPlan& plan() const { return plan_; }

  SceneConfig scene_at(double z) const {
    SceneConfig c = plan_.scene;
    c.target_distance = z;
    return c;
  }

  double gamma_at(double z) const { return plan_.gamma ? *plan_.gamma : default_gamma(z); }

  /// Builds (or reuses) geometry and masks for one (z', I); throws on failure.
  void prepare(double z, std::int64_t measurements) {
    const Geometry& geo = geometry(z);
    masks(geo, measurements);
  }

  const Geometry& geometry(double z) {
    const SceneConfig cfg = scene_at(z);
    const std::uint64_t key = scene_fingerprint(cfg);
    if (auto it = geometries_.find(key); it != geometries_.end()) return *it->second;
    auto scene = validate_scene(cfg);
    auto grids = sample_grids(scene);
    auto target = make_target(scene, plan_.target, plan_.resample);
    check_target_matches(scene, target);
    auto geo = std::make_unique<Geometry>(Geometry{scene, grids, std::nullopt, std::nullopt, {}, std::move(target),
                                                   gamma_at(z)});
    if (cfg.target_kind == TargetKind::plane2d) geo->psf_abs = psf_magnitudes(geo->scene, geo->grids);
    if (!plan_.ideal_masks) {
      KernelOptions opt;
      opt.workers = plan_.workers;
      if (plan_.kernel_cache.empty()) {
        geo->kernel = assemble_kernel(geo->scene, geo->grids, opt);
      } else {
        std::filesystem::create_directories(plan_.kernel_cache);
        char name[64];
        std::snprintf(name, sizeof name, "kernel_%016llx.bin", static_cast<unsigned long long>(key));
        geo->kernel = cached_kernel((std::filesystem::path(plan_.kernel_cache) / name).string(), geo->scene,
                                    geo->grids, opt);
      }
      geo->inverse = tikhonov_inverse(*geo->kernel, geo->gamma, plan_.threshold_factor, plan_.truncation);
    }
    return *geometries_.emplace(key, std::move(geo)).first->second;
  }

  const MaskSet& masks(const Geometry& geo, std::int64_t measurements) {
    const auto key = std::make_pair(scene_fingerprint(geo.scene.config()), measurements);
    if (auto it = masks_.find(key); it != masks_.end()) return *it->second;
    MaskOptions opt;
    opt.phase_rule = plan_.phase_rule;
    auto set = std::make_unique<MaskSet>(ideal_masks(geo.scene, geo.grids, measurements, opt));
    if (!plan_.ideal_masks) *set = realize_masks(*geo.kernel, *geo.inverse, std::move(*set), geo.scene->amplification);
    return *masks_.emplace(key, std::move(set)).first->second;
  }

  const Geometry* find_geometry(double z) const {
    const auto it = geometries_.find(scene_fingerprint(scene_at(z)));
    return it == geometries_.end() ? nullptr : it->second.get();
  }

  const MaskSet* find_masks(double z, std::int64_t measurements) const {
    const auto it = masks_.find({scene_fingerprint(scene_at(z)), measurements});
    return it == masks_.end() ? nullptr : it->second.get();
  }

  /// Measures and reconstructs one sweep point with the given noise seed.
  /// Needs `prepare(z, measurements)` to have succeeded.
  PointResult evaluate(double z, std::int64_t measurements, double snr_db, std::uint64_t seed) const {
    PointResult r;
    r.measurements = measurements;
    r.snr_db = snr_db;
    r.z_prime = z;
    r.gamma = gamma_at(z);
    r.seed = seed;
    const Geometry* geo = find_geometry(z);
    const MaskSet* mk = find_masks(z, measurements);
    if (!geo || !mk) throw Error(ErrorCode::invalid_config, "sweep point was not prepared");
    if (geo->inverse) r.retained_rank = geo->inverse->retained_rank;
    const auto start = std::chrono::steady_clock::now();

    NoiseSettings noise;
    noise.snr_db = snr_db;
    noise.mode = plan_.noise_mode;
    noise.absolute_variance = dbm_to_watts(plan_.noise_dbm);
    noise.seed = seed;
    r.records = measure(geo->scene, geo->grids, *mk, geo->target, noise);

    ReconstructionResult rec;
    if (geo->target.kind == TargetKind::plane2d) {
      rec = reconstruct_2d(r.records, *mk, geo->psf_abs);
    } else {
      rec = reconstruct_3d(r.records, *mk, geo->scene->k());
      rec.estimate /= geo->grids.target_cell_measure;
    }
    const Eigen::VectorXcd truth = geo->target.values();
    r.estimate = calibrate_estimate(rec.estimate, plan_.calibration, &truth);
    r.nmse = plan_.diagnostic ? nmse_unflagged(truth, r.estimate, rec.c.flagged) : nmse(truth, r.estimate);
    if (plan_.timing)
      r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return r;
  }

 private:
  ExperimentPlan plan_;
  std::map<std::uint64_t, std::unique_ptr<Geometry>> geometries_;
  std::map<std::pair<std::uint64_t, std::int64_t>, std::unique_ptr<MaskSet>> masks_;
};

// ---------------------------------------------------------------------------
// Run output
// ---------------------------------------------------------------------------

namespace detail {
inline std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline std::string point_tag(std::int64_t i, double snr, double z) {
  return "I" + std::to_string(i) + "_snr" + short_num(snr) + "_z" + short_num(z);
}

inline std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}
}  // namespace detail

inline const char* metrics_header() { return "I,snr_db,z_prime,gamma,nmse,retained_rank,wall_ms,seed"; }

/// One metrics row (no line terminator). Missing values are written as NA.
inline std::string metrics_row(const PointResult& r) {
  using detail::fmt_double;
  std::string s = std::to_string(r.measurements) + ',' + fmt_double(r.snr_db) + ',' + fmt_double(r.z_prime) + ',' +
                  fmt_double(r.gamma) + ',';
  s += r.nmse ? fmt_double(*r.nmse) : "NA";
  s += ',';
  s += r.retained_rank ? std::to_string(*r.retained_rank) : "NA";
  s += ',';
  s += r.wall_ms ? fmt_double(*r.wall_ms) : "NA";
  s += ',' + std::to_string(r.seed);
  return s;
}

/// Writes the calibrated estimate as P2 images: `<name>.pgm` for a plane,
/// `<name>_slice<z>_{re,im}.pgm` for a volume.
inline void write_estimate_images(const std::filesystem::path& dir, const std::string& name, const Geometry& geo,
                                  const Eigen::VectorXcd& estimate) {
  const auto& t = geo.target;
  if (t.kind == TargetKind::plane2d) {
    write_pgm_file((dir / (name + ".pgm")).string(), grid_to_image(estimate.real(), t.nx, t.ny));
    return;
  }
  const Eigen::Index plane = static_cast<Eigen::Index>(t.nx) * t.ny;
  for (int iz = 0; iz < t.nz; ++iz) {
    const Eigen::VectorXcd slice = estimate.segment(iz * plane, plane);
    const std::string base = name + "_slice" + std::to_string(iz);
    write_pgm_file((dir / (base + "_re.pgm")).string(), grid_to_image(slice.real(), t.nx, t.ny));
    write_pgm_file((dir / (base + "_im.pgm")).string(), grid_to_image(slice.imag(), t.nx, t.ny));
  }
}

struct RunSummary {
  std::vector<PointResult> points;
  std::filesystem::path directory;

  std::size_t failures() const {
    std::size_t n = 0;
    for (const auto& p : points) n += p.error ? 1 : 0;
    return n;
  }
};

/// Runs every (z', I, SNR) point of the plan and writes the run directory:
/// config.txt, metrics.csv, errors.csv, estimate images and, when
/// keep_artifacts is set, mask/profile/measurement exports. Stage errors are
/// recorded per point and the run goes on.
inline RunSummary run_plan(const ExperimentPlan& plan, const std::filesystem::path& out_dir) {
  validate_plan(plan);
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream cfg(out_dir / "config.txt", std::ios::binary);
    if (!cfg) throw Error(ErrorCode::io, "cannot write " + (out_dir / "config.txt").string());
    cfg << plan_to_text(plan);
  }

  Pipeline pipe(plan);
  struct Slot {
    double z;
    std::int64_t i;
    double snr;
    std::optional<ErrorCode> prep_error;
    std::string prep_message;
  };
  std::vector<Slot> slots;
  for (const double z : plan.z_values())
    for (const auto i : plan.measurements) {
      std::optional<ErrorCode> code;
      std::string msg;
      try {
        pipe.prepare(z, i);
        if (plan.keep_artifacts) {
          const auto& mk = *pipe.find_masks(z, i);
          const std::string tag = "I" + std::to_string(i) + "_z" + detail::short_num(z);
          save_masks((out_dir / ("masks_" + tag + "_ideal.bin")).string(), mk, MaskSource::ideal);
          if (mk.realized) {
            save_masks((out_dir / ("masks_" + tag + "_realized.bin")).string(), mk, MaskSource::realized);
            save_profiles((out_dir / ("profiles_" + tag + ".bin")).string(), mk);
            std::vector<double> norms;
            for (Eigen::Index r = 0; r < mk.profiles->rows(); ++r) norms.push_back(mk.profiles->row(r).norm());
            write_profile_summary((out_dir / ("profiles_" + tag + ".txt")).string(),
                                  *pipe.find_geometry(z)->inverse, norms);
          }
        }
      } catch (const Error& e) {
        code = e.code();
        msg = e.what();
      } catch (const std::exception& e) {
        code = ErrorCode::io;
        msg = e.what();
      }
      for (const double snr : plan.snr_db) slots.push_back({z, i, snr, code, msg});
    }

  RunSummary summary;
  summary.directory = out_dir;
  summary.points.resize(slots.size());
  auto work = [&](std::size_t idx) {
    const Slot& s = slots[idx];
    PointResult& r = summary.points[idx];
    const std::uint64_t seed = point_seed(plan.seed, s.i, s.snr, s.z);
    if (s.prep_error) {
      r.measurements = s.i;
      r.snr_db = s.snr;
      r.z_prime = s.z;
      r.gamma = pipe.gamma_at(s.z);
      r.seed = seed;
      r.error = s.prep_error;
      r.message = s.prep_message;
      return;
    }
    try {
      r = pipe.evaluate(s.z, s.i, s.snr, seed);
    } catch (const Error& e) {
      r.measurements = s.i;
      r.snr_db = s.snr;
      r.z_prime = s.z;
      r.gamma = pipe.gamma_at(s.z);
      r.seed = seed;
      r.error = e.code();
      r.message = e.what();
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(plan.workers, static_cast<unsigned>(slots.size())));
  if (workers == 1) {
    for (std::size_t k = 0; k < slots.size(); ++k) work(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < slots.size(); k = next++) work(k);
      });
  }

  std::ofstream metrics(out_dir / "metrics.csv", std::ios::binary);
  std::ofstream errors(out_dir / "errors.csv", std::ios::binary);
  if (!metrics || !errors) throw Error(ErrorCode::io, "cannot write metrics in " + out_dir.string());
  metrics << metrics_header() << "\r\n";
  errors << "I,snr_db,z_prime,seed,error,message\r\n";
  for (auto& r : summary.points) {
    metrics << metrics_row(r) << "\r\n";
    if (r.error) {
      errors << r.measurements << ',' << detail::fmt_double(r.snr_db) << ',' << detail::fmt_double(r.z_prime)
             << ',' << r.seed << ',' << to_string(*r.error) << ',' << detail::csv_quote(r.message) << "\r\n";
      continue;
    }
    const std::string tag = detail::point_tag(r.measurements, r.snr_db, r.z_prime);
    write_estimate_images(out_dir, "estimate_" + tag, *pipe.find_geometry(r.z_prime), r.estimate);
    if (plan.keep_artifacts) save_measurements_csv((out_dir / ("measurements_" + tag + ".csv")).string(), r.records);
  }
  return summary;
}

}  // namespace rismask
