#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "rismask/ris_synthesis.hpp"

using namespace rismask;

namespace {

Eigen::MatrixXcd random_complex(Eigen::Index rows, Eigen::Index cols, std::mt19937& rng) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = {nd(rng), nd(rng)};
  return m;
}

double objective(const Eigen::MatrixXcd& k, const Eigen::VectorXcd& p, const Eigen::VectorXcd& y, double gamma) {
  return (k * p - y).squaredNorm() + gamma * p.squaredNorm();
}

}  // namespace

TEST(Tikhonov, ClosedFormFilterValues) {
  Eigen::MatrixXcd k = Eigen::MatrixXcd::Zero(2, 2);
  k(0, 0) = 1.0;
  k(1, 1) = 1e-3;
  const auto inv = tikhonov_inverse(k, 1e-6, 0.0);
  EXPECT_NEAR(inv.lambda[1], 500.0, 1e-9);
  EXPECT_NEAR(inv.lambda[0], 1.0 / (1.0 + 1e-6), 1e-15);
  const auto sharp = tikhonov_inverse(k, 1e-300, 0.0);
  EXPECT_NEAR(sharp.lambda[0], 1.0, 1e-15);
}

TEST(Tikhonov, MatchesNormalEquations) {
  std::mt19937 rng(11);
  for (auto [m, n] : {std::pair{8, 12}, std::pair{16, 32}, std::pair{12, 8}}) {
    for (double gamma : {1e-2, 1e-6}) {
      const Eigen::MatrixXcd k = random_complex(m, n, rng);
      const Eigen::VectorXcd y = random_complex(m, 1, rng);
      const auto inv = tikhonov_inverse(k, gamma, 0.0);
      const Eigen::VectorXcd ref = oracle::tikhonov_normal(k, y, gamma);
      EXPECT_LT((inv.apply(y) - ref).norm() / ref.norm(), 1e-8);
      EXPECT_LT((inv.apply_rows(y.transpose()).transpose() - ref).norm() / ref.norm(), 1e-8);
    }
  }
}

TEST(Tikhonov, SolutionIsTheMinimizer) {
  std::mt19937 rng(5);
  std::normal_distribution<double> nd;
  const Eigen::MatrixXcd k = random_complex(6, 10, rng);
  const Eigen::VectorXcd y = random_complex(6, 1, rng);
  const double gamma = 1e-3;
  const Eigen::VectorXcd p = tikhonov_inverse(k, gamma, 0.0).apply(y);
  const double best = objective(k, p, y, gamma);
  for (int d = 0; d < 20; ++d) {
    Eigen::VectorXcd dir = random_complex(10, 1, rng);
    dir /= dir.norm();
    EXPECT_GT(objective(k, p + 1e-3 * dir, y, gamma), best);
  }
}

TEST(Tikhonov, TruncationRulesAndMonotoneRank) {
  Eigen::MatrixXcd k = Eigen::MatrixXcd::Zero(4, 4);
  k.diagonal() << 1.0, 1e-3, 1e-6, 1e-9;
  const double gamma = 1e-6;
  const auto sq = tikhonov_inverse(k, gamma, 1e-5);  // sigma^2 >= 1e-11
  EXPECT_EQ(sq.retained_rank, 2);
  EXPECT_EQ(sq.lambda[2], 0.0);
  const auto lin = tikhonov_inverse(k, gamma, 1e-5, TruncationRule::sigma);  // sigma >= 1e-11
  EXPECT_EQ(lin.retained_rank, 4);
  Eigen::Index last = 5;
  for (double tf : {0.0, 1e-8, 1e-5, 1e-2, 1.0, 1e3, 1e7}) {
    const auto inv = tikhonov_inverse(k, gamma, tf);
    EXPECT_LE(inv.retained_rank, last);
    EXPECT_LE(inv.retained_rank, 4);
    last = inv.retained_rank;
  }
  EXPECT_THROW(tikhonov_inverse(k, 0.0), Error);
}

TEST(Tikhonov, DefaultGammaSchedule) {
  EXPECT_EQ(default_gamma(2.0), 1e-12);
  EXPECT_EQ(default_gamma(3.0), 1e-12);
  EXPECT_EQ(default_gamma(4.0), 1e-14);
  EXPECT_EQ(default_gamma(8.0), 1e-15);
  EXPECT_EQ(default_gamma(0.125), 1e-12);
}

TEST(Synthesize, PowerBudgetAndScaleInvariance) {
  std::mt19937 rng(2);
  const Eigen::MatrixXcd k = random_complex(9, 20, rng);
  const auto inv = tikhonov_inverse(k, 1e-6);
  const Eigen::VectorXcd mask = random_complex(9, 1, rng);
  for (double pi_amp : {1.0, 0.25, 7.0}) {
    const auto p = synthesize(inv, mask, pi_amp);
    EXPECT_NEAR(p.p.squaredNorm() / (20.0 * pi_amp), 1.0, 1e-12);
    const auto scaled = synthesize(inv, mask * 3.5, pi_amp);
    EXPECT_LT((scaled.p - p.p).norm() / p.p.norm(), 1e-13);
  }
  try {
    synthesize(inv, Eigen::VectorXcd::Zero(9), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::zero_solution);
  }
}

TEST(RealizeMasks, WellPosedKernelReproducesIdeal) {
  std::mt19937 rng(8);
  const Eigen::MatrixXcd q = random_complex(16, 16, rng).householderQr().householderQ();
  KernelMatrix k{q, KernelKind::z_2d, 0};
  MaskSet set;
  set.kind = MaskKind::mask2d;
  set.ideal = design_amplitudes(32, 16).cast<cdouble>();
  const auto inv = tikhonov_inverse(k, 1e-14);
  const auto out = realize_masks(k, inv, set, 1.0);
  ASSERT_TRUE(out.realized && out.profiles);
  EXPECT_EQ(out.realized->rows(), 32);
  for (Eigen::Index i = 0; i < 32; ++i) {
    // Realized masks carry the power normalization; compare directions.
    const Eigen::VectorXcd a = out.realized->row(i).transpose();
    const Eigen::VectorXcd b = set.ideal.row(i).transpose();
    EXPECT_LT((a / a.norm() - b / b.norm()).norm(), 1e-6);
    EXPECT_NEAR(out.profiles->row(i).squaredNorm(), 16.0, 1e-10);
  }
  EXPECT_NEAR(mean_amplitude_correlation(out), 1.0, 1e-10);
}

TEST(RealizeMasks, KindMismatch) {
  KernelMatrix k{Eigen::MatrixXcd::Identity(4, 4), KernelKind::y_3d, 0};
  MaskSet set;
  set.kind = MaskKind::mask2d;
  set.ideal = design_amplitudes(8, 4).cast<cdouble>();
  try {
    realize_masks(k, tikhonov_inverse(k, 1e-6), set, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kind_mismatch);
  }
}

TEST(RealizeMasks, DeskScaleCorrelationFallsWithDistance) {
  double last = 2.0;
  for (double z : {0.125, 0.25, 0.5}) {
    SceneConfig c;
    c.target_distance = z;
    const auto scene = validate_scene(c);
    const auto g = sample_grids(scene);
    const auto k = kernel_2d(scene, g);
    const auto inv = tikhonov_inverse(k, default_gamma(z));
    const auto set = realize_masks(k, inv, ideal_masks(scene, g, 256), 1.0);
    const double corr = mean_amplitude_correlation(set);
    if (z == 0.125) {
      // First Hadamard mask on its own.
      const Eigen::VectorXd a = set.realized->row(0).cwiseAbs().transpose();
      const Eigen::VectorXd b = set.ideal.row(0).cwiseAbs().transpose();
      EXPECT_GT(a.dot(b) / (a.norm() * b.norm()), 0.9);
    }
    EXPECT_LT(corr, last);
    last = corr;
  }
}
