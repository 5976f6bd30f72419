#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rismask/rismask.hpp"

using namespace rismask;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  bool ideal_masks = false;
  bool timing = false;
  int workers = 0;
};

KeyValues load_keys(const Common& c) {
  KeyValues kv = c.config.empty() ? KeyValues{} : KeyValues::load(c.config);
  kv.apply_overrides(c.overrides);
  if (c.ideal_masks) kv.set("ideal_masks", "true");
  if (c.timing) kv.set("timing", "true");
  if (c.workers > 0) kv.set("workers", std::to_string(c.workers));
  return kv;
}

ExperimentPlan load_plan(const Common& c) { return plan_from_keys(load_keys(c)); }

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "key = value config file");
  app->add_option("--set", c.overrides, "override a config key (key=value), repeatable");
  app->add_flag("--ideal-masks", c.ideal_masks, "skip RIS synthesis and apply ideal masks directly");
  app->add_flag("--timing", c.timing, "record wall_ms in metrics");
  app->add_option("--workers", c.workers, "worker threads");
}

/// Masks for one I at the plan's first z': ideal, or realized through the kernel.
MaskSet build_masks(const ExperimentPlan& plan, std::int64_t measurements, Pipeline& pipe) {
  const double z = plan.z_values().front();
  pipe.prepare(z, measurements);
  return *pipe.find_masks(z, measurements);
}

int cmd_validate(const Common& common) {
  const auto plan = load_plan(common);
  for (const double z : plan.z_values()) {
    SceneConfig c = plan.scene;
    c.target_distance = z;
    const auto scene = validate_scene(c);
    const auto res = resolution(scene);
    std::printf("z' = %g m: ok\n", z);
    std::printf("  target kind        %s\n", to_string(c.target_kind));
    std::printf("  RIS samples N      %d (%d x %d)\n", c.n_ris(), c.ris_nx, c.ris_ny);
    std::printf("  target samples M   %d\n", c.n_target());
    std::printf("  RIS Rayleigh       %.6g m\n", c.ris_rayleigh_distance());
    std::printf("  target Rayleigh    %.6g m (bound %.6g m)\n", c.target_rayleigh_distance(),
                c.far_field_factor * c.target_rayleigh_distance());
    std::printf("  receiver distance  %.6g m\n", c.receiver_distance());
    std::printf("  sin(theta/2)       %.4f x, %.4f y\n", res.sine_x, res.sine_y);
    std::printf("  resolution         %.4g m x, %.4g m y\n", res.dx, res.dy);
  }
  return 0;
}

int cmd_kernel(const Common& common, const std::string& out) {
  const auto plan = load_plan(common);
  SceneConfig c = plan.scene;
  c.target_distance = plan.z_values().front();
  const auto scene = validate_scene(c);
  const auto grids = sample_grids(scene);
  KernelOptions opt;
  opt.workers = plan.workers;
  const auto k = cached_kernel(out, scene, grids, opt);
  const auto sigma = singular_values(k);
  const double gamma = plan.gamma ? *plan.gamma : default_gamma(c.target_distance);
  const auto inv = tikhonov_inverse(k, gamma, plan.threshold_factor, plan.truncation);
  std::printf("%s kernel %lld x %lld, fingerprint %016llx -> %s\n", to_string(k.kind),
              static_cast<long long>(k.rows()), static_cast<long long>(k.cols()),
              static_cast<unsigned long long>(k.fingerprint), out.c_str());
  std::printf("sigma_1 = %.6g, sigma_min = %.6g, rank(1e-3 sigma_1) = %lld, retained (gamma %.3g) = %lld\n",
              sigma[0], sigma[sigma.size() - 1], static_cast<long long>(count_above(sigma, 1e-3)), gamma,
              static_cast<long long>(inv.retained_rank));
  return 0;
}

int cmd_masks(const Common& common, std::int64_t measurements, const std::string& out) {
  auto plan = load_plan(common);
  plan.ideal_masks = true;
  Pipeline pipe(plan);
  const auto set = build_masks(plan, measurements, pipe);
  save_masks(out, set, MaskSource::ideal);
  const auto c = estimate_c(set, MaskSource::ideal);
  std::printf("%lld ideal masks over %lld points -> %s (c in [%.6g, %.6g])\n", static_cast<long long>(set.count()),
              static_cast<long long>(set.points()), out.c_str(), c.c.minCoeff(), c.c.maxCoeff());
  return 0;
}

int cmd_synthesize(const Common& common, std::int64_t measurements, const std::string& out,
                   const std::string& profiles) {
  auto plan = load_plan(common);
  plan.ideal_masks = false;
  Pipeline pipe(plan);
  const auto set = build_masks(plan, measurements, pipe);
  save_masks(out, set, MaskSource::realized);
  const auto& inv = *pipe.find_geometry(plan.z_values().front())->inverse;
  if (!profiles.empty()) {
    save_profiles(profiles, set);
    std::vector<double> norms;
    for (Eigen::Index r = 0; r < set.profiles->rows(); ++r) norms.push_back(set.profiles->row(r).norm());
    write_profile_summary(profiles + ".txt", inv, norms);
  }
  std::printf("%lld realized masks -> %s, retained rank %lld, gamma %.3g, mean amplitude correlation %.4f\n",
              static_cast<long long>(set.count()), out.c_str(), static_cast<long long>(inv.retained_rank), inv.gamma,
              mean_amplitude_correlation(set));
  return 0;
}

int cmd_measure(const Common& common, std::int64_t measurements, const std::string& masks_file, double snr,
                std::uint64_t seed, const std::string& out) {
  auto plan = load_plan(common);
  if (!masks_file.empty()) plan.ideal_masks = true;  // masks come from the file, no kernel needed
  Pipeline pipe(plan);
  const double z = plan.z_values().front();
  const Geometry& geo = pipe.geometry(z);
  const MaskSet set = masks_file.empty() ? build_masks(plan, measurements, pipe) : load_masks(masks_file);
  NoiseSettings ns;
  ns.snr_db = snr;
  ns.mode = plan.noise_mode;
  ns.absolute_variance = dbm_to_watts(plan.noise_dbm);
  ns.seed = seed;
  const auto rec = measure(geo.scene, geo.grids, set, geo.target, ns);
  save_measurements_csv(out, rec);
  std::printf("%lld measurements -> %s (sigma2 %.6g)\n", static_cast<long long>(rec.size()), out.c_str(), rec.sigma2);
  return 0;
}

int cmd_reconstruct(const Common& common, const std::string& masks_file, const std::string& meas_file,
                    const std::string& out) {
  auto plan = load_plan(common);
  plan.ideal_masks = true;  // the kernel is not needed here
  Pipeline pipe(plan);
  const Geometry& geo = pipe.geometry(plan.z_values().front());
  const MaskSet set = load_masks(masks_file);
  const MeasurementSet rec = load_measurements_csv(meas_file);
  ReconstructionResult r;
  if (geo.target.kind == TargetKind::plane2d) {
    r = reconstruct_2d(rec, set, geo.psf_abs);
  } else {
    r = reconstruct_3d(rec, set, geo.scene->k());
    r.estimate /= geo.grids.target_cell_measure;
  }
  const Eigen::VectorXcd truth = geo.target.values();
  const Eigen::VectorXcd est = calibrate_estimate(r.estimate, plan.calibration, &truth);
  const std::filesystem::path dir = std::filesystem::path(out).parent_path();
  const std::string stem = std::filesystem::path(out).stem().string();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  write_estimate_images(dir.empty() ? "." : dir, stem, geo, est);
  std::printf("flagged points %lld, NMSE vs '%s' (%s) = %.6g\n", static_cast<long long>(r.c.flagged_count()),
              plan.target.c_str(), to_string(plan.calibration), nmse(truth, est));
  return 0;
}

int cmd_run(const Common& common, const std::string& out, bool full_sweep) {
  auto plan = load_plan(common);
  if (!full_sweep) {
    plan.measurements.resize(1);
    plan.snr_db.resize(1);
    plan.z_prime = {plan.z_values().front()};
  }
  const auto summary = run_plan(plan, out);
  std::printf("%s\n", metrics_header());
  for (const auto& p : summary.points) std::printf("%s\n", metrics_row(p).c_str());
  std::printf("%zu points, %zu failed -> %s\n", summary.points.size(), summary.failures(), out.c_str());
  return summary.failures() == summary.points.size() ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RIS virtual-mask imaging simulator"};
  app.require_subcommand(1);
  Common common;

  auto* validate = app.add_subcommand("validate", "check the scene and report resolution");
  add_common(validate, common);

  std::string out_path;
  std::string profiles_path;
  std::string masks_path;
  std::string meas_path;
  std::int64_t measurements = 256;
  double snr = 20.0;
  std::uint64_t seed = 1;

  auto* kernel = app.add_subcommand("kernel", "assemble the kernel and cache it");
  add_common(kernel, common);
  kernel->add_option("-o,--out", out_path, "kernel file")->default_val("kernel.bin");

  auto* masks = app.add_subcommand("masks", "export ideal masks");
  add_common(masks, common);
  masks->add_option("-I,--measurements", measurements, "number of masks")->default_val(256);
  masks->add_option("-o,--out", out_path, "mask file")->default_val("masks.bin");

  auto* synth = app.add_subcommand("synthesize", "synthesize RIS profiles and export realized masks");
  add_common(synth, common);
  synth->add_option("-I,--measurements", measurements, "number of masks")->default_val(256);
  synth->add_option("-o,--out", out_path, "realized mask file")->default_val("realized.bin");
  synth->add_option("--profiles", profiles_path, "RIS profile file (summary goes to <file>.txt)");

  auto* meas = app.add_subcommand("measure", "simulate receiver measurements");
  add_common(meas, common);
  meas->add_option("-I,--measurements", measurements, "number of masks when no mask file is given")
      ->default_val(256);
  meas->add_option("--masks", masks_path, "mask file (default: build from config)");
  meas->add_option("--snr", snr, "SNR in dB")->default_val(20.0);
  meas->add_option("--seed", seed, "noise seed")->default_val(1);
  meas->add_option("-o,--out", out_path, "measurement CSV")->default_val("measurements.csv");

  auto* recon = app.add_subcommand("reconstruct", "reconstruct from masks and measurements");
  add_common(recon, common);
  recon->add_option("--masks", masks_path, "mask file")->required();
  recon->add_option("--measurements", meas_path, "measurement CSV")->required();
  recon->add_option("-o,--out", out_path, "estimate image (.pgm)")->default_val("estimate.pgm");

  auto* run = app.add_subcommand("run", "end-to-end run at the first value of each sweep list");
  add_common(run, common);
  run->add_option("-o,--out", out_path, "run directory")->default_val("run");

  auto* sweep = app.add_subcommand("sweep", "run every (z', I, SNR) point of the plan");
  add_common(sweep, common);
  sweep->add_option("-o,--out", out_path, "run directory")->default_val("sweep");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(common);
    if (*kernel) return cmd_kernel(common, out_path);
    if (*masks) return cmd_masks(common, measurements, out_path);
    if (*synth) return cmd_synthesize(common, measurements, out_path, profiles_path);
    if (*meas) return cmd_measure(common, measurements, masks_path, snr, seed, out_path);
    if (*recon) return cmd_reconstruct(common, masks_path, meas_path, out_path);
    if (*run) return cmd_run(common, out_path, false);
    if (*sweep) return cmd_run(common, out_path, true);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
