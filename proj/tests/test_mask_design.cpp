#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"
#include "rismask/mask_design.hpp"

using namespace rismask;

TEST(Hadamard, OrthogonalAndSylvester) {
  for (std::int64_t order : {2, 4, 8, 64, 256}) {
    const Eigen::MatrixXi h = hadamard(order);
    EXPECT_EQ(h.transpose() * h, Eigen::MatrixXi::Identity(order, order) * static_cast<int>(order));
    EXPECT_EQ(h.col(0), Eigen::VectorXi::Ones(order));
    EXPECT_EQ(h.row(0), Eigen::RowVectorXi::Ones(order));
  }
  const Eigen::MatrixXi h2 = hadamard(2);
  EXPECT_EQ(h2(1, 1), -1);
}

TEST(Hadamard, UnsupportedOrders) {
  for (std::int64_t order : {0, 1, 3, 12, 100}) {
    try {
      hadamard(order);
      FAIL() << order;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::unsupported_order);
    }
  }
}

TEST(Amplitudes, SignMapAndBalancedColumns) {
  for (std::int64_t i : {8, 64, 1024}) {
    const std::int64_t m = i - 1;
    const Eigen::MatrixXd q = design_amplitudes(i, m);
    const Eigen::MatrixXi s = (2.0 * q.array() - 1.0).round().cast<int>().matrix();
    EXPECT_EQ(s.transpose() * s, Eigen::MatrixXi::Identity(m, m) * static_cast<int>(i));
    EXPECT_EQ(s.colwise().sum(), Eigen::RowVectorXi::Zero(m));
    for (Eigen::Index r = 0; r < q.rows(); ++r)
      for (Eigen::Index c = 0; c < q.cols(); ++c) EXPECT_TRUE(q(r, c) == 0.0 || q(r, c) == 1.0);
  }
}

TEST(Amplitudes, NeedsOneMoreMeasurementThanPoints) {
  try {
    design_amplitudes(16, 16);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::insufficient_measurements);
  }
  EXPECT_NO_THROW(design_amplitudes(16, 15));
  EXPECT_NO_THROW(design_amplitudes_3d(16, 16));
  EXPECT_THROW(design_amplitudes_3d(16, 17), Error);
}

TEST(Amplitudes, ThreeDimensionalUsesFirstColumnOnlyWhenForced) {
  const Eigen::MatrixXd full = design_amplitudes_3d(8, 8);
  EXPECT_EQ(full.col(0), Eigen::VectorXd::Ones(8));
  const Eigen::MatrixXd skip = design_amplitudes_3d(8, 4);
  EXPECT_EQ(skip, design_amplitudes(8, 4));
}

TEST(Covariance, IdealMasksGiveQuarterDelta) {
  for (std::int64_t i : {8, 64, 1024}) {
    MaskSet set;
    set.ideal = design_amplitudes(i, i - 1).cast<cdouble>();
    for (Eigen::Index ref : {Eigen::Index{0}, (i - 1) / 2, i - 2}) {
      const Eigen::VectorXd v = mask_covariance(set, ref);
      for (Eigen::Index m = 0; m < v.size(); ++m) EXPECT_EQ(v[m], m == ref ? 0.25 : 0.0);
    }
  }
}

TEST(Covariance, Errors) {
  MaskSet empty;
  EXPECT_THROW(mask_covariance(empty, 0), Error);
  MaskSet set;
  set.ideal = design_amplitudes(8, 3).cast<cdouble>();
  EXPECT_THROW(mask_covariance(set, 3), Error);
  EXPECT_THROW(set.select(MaskSource::realized), Error);
}

TEST(Phases, ExactRuleMakesPsfTimesMaskRealPositive) {
  SceneConfig c;
  c.target_nx = c.target_ny = 5;
  const auto scene = validate_scene(c);
  const auto g = sample_grids(scene);
  MaskOptions opt;
  opt.phase_rule = PhaseRule::exact;
  const auto set = ideal_masks(scene, g, 32, opt);
  EXPECT_EQ(set.kind, MaskKind::mask2d);
  for (Eigen::Index i = 0; i < set.count(); ++i)
    for (Eigen::Index m = 0; m < set.points(); ++m) {
      const cdouble w = oracle::psf(c, g.target_points[m]) * set.ideal(i, m);
      if (std::abs(set.ideal(i, m)) == 0.0) continue;
      EXPECT_NEAR(std::arg(w), 0.0, 1e-9);
    }
}

TEST(Phases, TaylorRuleIsFirstOrderOfExact) {
  SceneConfig c;
  c.target_nx = c.target_ny = 5;
  const auto scene = validate_scene(c);
  const auto g = sample_grids(scene);
  const auto taylor = design_phases_2d(scene, g, PhaseRule::taylor);
  const auto exact = design_phases_2d(scene, g, PhaseRule::exact);
  const double k = c.k();
  const double r0 = c.receiver_distance();
  for (Eigen::Index m = 0; m < taylor.size(); ++m) {
    const auto& t = g.target_points[m];
    // Second-order remainder of R' about the centre, bounded by k rho^2 / R0.
    const double rho2 = t.x * t.x + t.y * t.y;
    EXPECT_LE(std::abs(taylor[m] - exact[m]), k * rho2 / r0 + 1e-9);
  }
  EXPECT_DOUBLE_EQ(taylor[12], pi / 2 + k * r0);  // centre pixel
}

TEST(IdealMasks, VolumeMasksAreRealBinary) {
  SceneConfig c;
  c.target_kind = TargetKind::volume3d;
  c.target_nx = c.target_ny = 2;
  c.target_nz = 2;
  c.region_depth = 0.05;
  const auto scene = validate_scene(c);
  const auto set = ideal_masks(scene, sample_grids(scene), 8);
  EXPECT_EQ(set.kind, MaskKind::mask3d);
  EXPECT_EQ(set.ideal.imag().squaredNorm(), 0.0);
  EXPECT_EQ(set.fingerprint, scene_fingerprint(c));
}

TEST(MaskExport, RoundTrip) {
  const auto scene = validate_scene(SceneConfig{});
  auto set = ideal_masks(scene, sample_grids(scene), 256);
  const auto path = (std::filesystem::temp_directory_path() / "rismask_masks_test.bin").string();
  save_masks(path, set, MaskSource::ideal);
  const auto back = load_masks(path);
  EXPECT_EQ(back.ideal, set.ideal);
  EXPECT_EQ(back.kind, set.kind);
  EXPECT_EQ(back.fingerprint, set.fingerprint);
  std::filesystem::remove(path);
}
