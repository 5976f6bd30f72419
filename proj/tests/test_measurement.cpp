#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "rismask/measurement.hpp"
#include "rismask/ris_synthesis.hpp"

using namespace rismask;

namespace {

struct Plane {
  ValidatedScene scene;
  SampleGrids grids;
};

Plane plane(int n = 4) {
  SceneConfig c;
  c.target_nx = c.target_ny = n;
  c.ris_nx = c.ris_ny = 8;
  auto s = validate_scene(c);
  return {s, sample_grids(s)};
}

Plane volume() {
  SceneConfig c;
  c.target_kind = TargetKind::volume3d;
  c.target_nx = 2;
  c.target_ny = 1;
  c.target_nz = 1;
  c.region_depth = 0.02;
  c.ris_nx = c.ris_ny = 8;
  auto s = validate_scene(c);
  return {s, sample_grids(s)};
}

}  // namespace

TEST(TargetModel, Validation) {
  EXPECT_THROW(TargetModel::plane(2, 2, Eigen::VectorXd::Constant(4, 0.5)), Error);
  EXPECT_THROW(TargetModel::plane(2, 2, Eigen::VectorXd::Ones(3)), Error);
  EXPECT_THROW(TargetModel::volume(1, 1, 1, Eigen::VectorXcd::Constant(1, cdouble(-0.1, 0))), Error);
  EXPECT_THROW(TargetModel::volume(1, 1, 1, Eigen::VectorXcd::Constant(1, cdouble(0.1, -1))), Error);
  EXPECT_NO_THROW(TargetModel::volume(1, 1, 1, Eigen::VectorXcd::Constant(1, cdouble(0.1, 1))));
}

TEST(Contrast, Formula) {
  EXPECT_EQ(contrast_from_material(1.0, 0.0, 0.01), cdouble(0.0, 0.0));
  EXPECT_EQ(contrast_from_material(2.0, 0.0, 0.01), cdouble(1.0, 0.0));
  const cdouble lossy = contrast_from_material(3.0, 0.5, 0.01);
  const double omega = 2 * pi * light_speed / 0.01;
  EXPECT_NEAR(lossy.imag(), 0.5 / (eps0 * omega), 1e-12);
  EXPECT_GT(lossy.imag(), 0.0);
}

TEST(TargetCurrent, ReflectionFactor) {
  const Eigen::VectorXcd mask = Eigen::VectorXcd::LinSpaced(4, 0.0, 3.0) * cdouble(1, 1);
  auto t = TargetModel::plane(2, 2, Eigen::VectorXd::Ones(4), -1.0);
  EXPECT_EQ(target_current_2d(mask, t), (2.0 * mask).eval());
  t.reflection = 1.0;
  EXPECT_EQ(target_current_2d(mask, t).squaredNorm(), 0.0);
  const auto v = TargetModel::volume(1, 1, 1, Eigen::VectorXcd::Zero(1));
  EXPECT_THROW(target_current_2d(Eigen::VectorXcd::Zero(1), v), Error);
}

TEST(ReceiverField2d, SinglePixelAndEmptyTarget) {
  const auto [scene, g] = plane();
  const Eigen::VectorXcd current = Eigen::VectorXcd::Constant(16, cdouble(0.5, -0.25));
  Eigen::VectorXd occ = Eigen::VectorXd::Zero(16);
  const auto empty = TargetModel::plane(4, 4, occ);
  EXPECT_EQ(receiver_field_2d(scene, g, current, empty), cdouble{});
  occ[6] = 1.0;
  const auto single = TargetModel::plane(4, 4, occ);
  const cdouble expected = oracle::psf(scene.config(), g.target_points[6]) * current[6] * g.target_cell_measure;
  EXPECT_LT(std::abs(receiver_field_2d(scene, g, current, single) - expected), 1e-13 * std::abs(expected));
}

TEST(ReceiverField2d, ExactPhaseFullTarget) {
  const auto [scene, g] = plane();
  MaskOptions opt;
  opt.phase_rule = PhaseRule::exact;
  const auto masks = ideal_masks(scene, g, 32, opt);
  const auto full = TargetModel::plane(4, 4, Eigen::VectorXd::Ones(16));
  const Eigen::VectorXcd j = target_current_2d(masks.ideal.row(3).transpose(), full);
  const cdouble e = receiver_field_2d(scene, g, j, full);
  double sum = 0.0;
  for (Eigen::Index m = 0; m < 16; ++m) sum += std::abs(oracle::psf(scene.config(), g.target_points[m])) * std::abs(j[m]);
  sum *= g.target_cell_measure;
  EXPECT_NEAR(std::abs(e), sum, 1e-12 * sum);
  // Constant phase: every nonzero summand has the same argument as the total.
  EXPECT_NEAR(std::arg(e), 0.0, 1e-9);
  // Sub-targets never exceed the full target.
  for (int drop = 0; drop < 16; ++drop) {
    Eigen::VectorXd occ = Eigen::VectorXd::Ones(16);
    occ[drop] = 0.0;
    EXPECT_LE(std::abs(receiver_field_2d(scene, g, j, TargetModel::plane(4, 4, occ))), std::abs(e) * (1 + 1e-12));
  }
}

TEST(ReceiverField2d, MagnitudeInvariantUnderGlobalPhase) {
  const auto [scene, g] = plane();
  const auto k = kernel_2d(scene, g);
  std::mt19937 rng(4);
  std::normal_distribution<double> nd;
  Eigen::VectorXcd p(64);
  for (auto& v : p) v = {nd(rng), nd(rng)};
  Eigen::VectorXd occ = Eigen::VectorXd::Zero(16);
  occ.head(7).setOnes();
  const auto t = TargetModel::plane(4, 4, occ);
  const cdouble a = receiver_field_2d(scene, g, target_current_2d(h_out_y(k, p), t), t);
  const cdouble b =
      receiver_field_2d(scene, g, target_current_2d(h_out_y(k, p * std::polar(1.0, 1.1)), t), t);
  EXPECT_NEAR(std::abs(a), std::abs(b), 1e-12 * std::abs(a));
}

TEST(ReceiverField3d, BornLinearityAndTwoPaths) {
  const auto [scene, g] = volume();
  const auto y = kernel_3d(scene, g);
  std::mt19937 rng(9);
  std::normal_distribution<double> nd;
  Eigen::VectorXcd p(64);
  for (auto& v : p) v = {nd(rng), nd(rng)};
  const Eigen::VectorXcd chi = (Eigen::VectorXcd(2) << cdouble(1.0, 0.2), cdouble(0.5, 0.0)).finished();
  const auto t = TargetModel::volume(2, 1, 1, chi);
  const cdouble e = receiver_field_3d(scene, g, y, p, t);
  const auto air = TargetModel::volume(2, 1, 1, Eigen::VectorXcd::Zero(2));
  EXPECT_EQ(receiver_field_3d(scene, g, y, p, air), cdouble{});
  const auto t3 = TargetModel::volume(2, 1, 1, chi * 3.0);
  EXPECT_LT(std::abs(receiver_field_3d(scene, g, y, p, t3) - 3.0 * e), 1e-13 * std::abs(e));
  const double k = scene->k();
  cdouble ls{};
  for (Eigen::Index m = 0; m < 2; ++m) {
    const auto eo = e_out_components(scene.config(), g, p, g.target_points[m]);
    ls += k * k * chi[m] * (green_tensor(scene->receiver, g.target_points[m], k) * eo)(0) * g.target_cell_measure;
  }
  EXPECT_LT(std::abs(e - ls) / std::abs(ls), 1e-10);
}

TEST(Noise, VarianceRules) {
  EXPECT_THROW(noise_variance(Eigen::VectorXcd(), 10.0), Error);
  EXPECT_EQ(noise_variance(Eigen::VectorXcd::Zero(4), 10.0), 0.0);
  EXPECT_EQ(noise_variance(Eigen::VectorXcd::Ones(4), std::numeric_limits<double>::infinity()), 0.0);
  EXPECT_NEAR(noise_variance(Eigen::VectorXcd::Constant(4, cdouble(3, 4)), 10.0), 2.5, 1e-14);
}

TEST(Noise, ThermalFloor) {
  EXPECT_DOUBLE_EQ(thermal_noise_dbm(-174.0, 1e6), -114.0);
  EXPECT_NEAR(NoiseSettings{}.absolute_variance, 1e-3 * std::pow(10.0, -11.4), 1e-30);
}

TEST(Noise, EmpiricalSnr) {
  const Eigen::VectorXcd clean = Eigen::VectorXcd::Constant(10000, cdouble(0.6, 0.8));
  const double sigma2 = noise_variance(clean, 10.0);
  double power = 0.0;
  for (Eigen::Index i = 0; i < clean.size(); ++i)
    power += std::norm(noise_sample(77, static_cast<std::uint64_t>(i), sigma2));
  power /= static_cast<double>(clean.size());
  EXPECT_NEAR(10.0 * std::log10(1.0 / power), 10.0, 0.1);
}

TEST(Measure, DeterministicAndHighSnr) {
  const auto [scene, g] = plane();
  const auto masks = ideal_masks(scene, g, 32);
  Eigen::VectorXd occ = Eigen::VectorXd::Zero(16);
  occ[3] = occ[9] = 1.0;
  const auto t = TargetModel::plane(4, 4, occ);
  NoiseSettings ns;
  ns.seed = 42;
  const auto a = measure(scene, g, masks, t, ns);
  const auto b = measure(scene, g, masks, t, ns);
  ASSERT_EQ(a.size(), 32);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].noisy, b.records[i].noisy);
    EXPECT_EQ(a.records[i].magnitude, std::abs(a.records[i].noisy));
  }
  ns.seed = 43;
  EXPECT_NE(measure(scene, g, masks, t, ns).records[0].noisy, a.records[0].noisy);
  ns.snr_db = 300.0;
  const auto quiet = measure(scene, g, masks, t, ns);
  for (const auto& r : quiet.records)
    EXPECT_LE(std::abs(r.noisy - r.noiseless), 1e-10 * quiet.noiseless_fields().cwiseAbs().maxCoeff());
  // Noiseless values equal the per-mask forward chain.
  for (Eigen::Index i = 0; i < 32; ++i) {
    const cdouble direct = receiver_field_2d(scene, g, target_current_2d(masks.ideal.row(i).transpose(), t), t);
    EXPECT_LT(std::abs(a.records[static_cast<std::size_t>(i)].noiseless - direct), 1e-13 * (std::abs(direct) + 1e-30));
  }
}

TEST(Measure, RelativeModeHitsRequestedSnr) {
  const auto [scene, g] = plane();
  const auto masks = ideal_masks(scene, g, 32);
  const auto t = TargetModel::plane(4, 4, Eigen::VectorXd::Ones(16));
  NoiseSettings ns;
  ns.snr_db = 10.0;
  const auto m = measure(scene, g, masks, t, ns);
  EXPECT_NEAR(m.sigma2, m.noiseless_fields().squaredNorm() / 32.0 / 10.0, 1e-12 * m.sigma2);
  ns.mode = NoiseMode::absolute;
  EXPECT_EQ(measure(scene, g, masks, t, ns).sigma2, ns.absolute_variance);
}

TEST(Measure, KindChecks) {
  const auto [scene, g] = plane();
  const auto masks = ideal_masks(scene, g, 32);
  const auto wrong = TargetModel::plane(2, 2, Eigen::VectorXd::Ones(4));
  EXPECT_THROW(measure(scene, g, masks, wrong, {}), Error);
}

TEST(MeasurementCsv, RoundTrip) {
  const auto [scene, g] = plane();
  const auto masks = ideal_masks(scene, g, 32);
  const auto t = TargetModel::plane(4, 4, Eigen::VectorXd::Ones(16));
  const auto m = measure(scene, g, masks, t, {});
  const auto path = (std::filesystem::temp_directory_path() / "rismask_meas.csv").string();
  save_measurements_csv(path, m);
  const auto back = load_measurements_csv(path);
  ASSERT_EQ(back.size(), m.size());
  EXPECT_EQ(back.kind, TargetKind::plane2d);
  EXPECT_EQ(back.magnitudes(), m.magnitudes());
  EXPECT_EQ(back.noiseless_fields(), m.noiseless_fields());
  EXPECT_EQ(back.sigma2, m.sigma2);

  const auto [vs, vg] = volume();
  const auto vm = ideal_masks(vs, vg, 2);
  const auto vt = TargetModel::volume(2, 1, 1, Eigen::VectorXcd::Constant(2, cdouble(1.0, 0.5)));
  const auto meas3 = measure(vs, vg, vm, vt, {});
  save_measurements_csv(path, meas3);
  const auto back3 = load_measurements_csv(path);
  EXPECT_EQ(back3.kind, TargetKind::volume3d);
  EXPECT_EQ(back3.noisy_fields(), meas3.noisy_fields());
  std::filesystem::remove(path);
}
