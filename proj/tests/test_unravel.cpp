#include <gtest/gtest.h>

#include <random>

#include "memchan/errors.hpp"
#include "memchan/unravel.hpp"

using namespace memchan;

namespace {

double max_off_diagonal(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd off = m;
  off.diagonal().setZero();
  return off.cwiseAbs().maxCoeff();
}

}  // namespace

TEST(SvdUnravel, MemorylessChannelIsUniform) {
  const auto c = build_coupling({0.0, 0.3, 10});
  const auto r = svd_unravel(c.f);
  for (Eigen::Index k = 0; k < 10; ++k) EXPECT_NEAR(r.eta_eff(k), 0.3, 1e-14);
  const Eigen::MatrixXd d = r.v_matrix * c.f * r.u_matrix.transpose();
  EXPECT_LE(max_off_diagonal(d), 1e-12);
}

TEST(SvdUnravel, PerfectMemoryShiftSingularValues) {
  const auto c = build_coupling({1.0, 0.0, 3});
  const auto r = svd_unravel(c.f);
  EXPECT_NEAR(r.eta_eff(0), 1.0, 1e-14);
  EXPECT_NEAR(r.eta_eff(1), 1.0, 1e-14);
  EXPECT_NEAR(r.eta_eff(2), 0.0, 1e-14);
}

TEST(SvdUnravel, RandomChannelsDiagonalizeWithSortedNonNegativeSpectrum) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = build_coupling({u(rng), u(rng), 32});
    const auto r = svd_unravel(c.f);
    const Eigen::MatrixXd d = r.v_matrix * c.f * r.u_matrix.transpose();
    EXPECT_LE(max_off_diagonal(d), 1e-10);
    for (Eigen::Index k = 0; k < 32; ++k) {
      EXPECT_GE(d(k, k), -1e-15);
      EXPECT_NEAR(d(k, k), std::sqrt(r.eta_eff(k)), 1e-10);
      EXPECT_GE(r.eta_eff(k), 0.0);
      EXPECT_LE(r.eta_eff(k), 1.0 + 1e-12);
      if (k > 0) EXPECT_LE(r.eta_eff(k), r.eta_eff(k - 1));
    }
    const Eigen::MatrixXd rebuilt =
        r.v_matrix.transpose() * r.eta_eff.cwiseSqrt().asDiagonal() * r.u_matrix;
    EXPECT_LE((rebuilt - c.f).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(SvdUnravel, RejectsBadInput) {
  EXPECT_THROW((void)svd_unravel(Eigen::MatrixXd(2, 3)), DimensionError);
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(3, 3);
  m(1, 1) = std::nan("");
  EXPECT_THROW((void)svd_unravel(m), NumericError);
}

TEST(EffectiveCoupling, IdentityProcessingIsNoOp) {
  const auto c = build_coupling({0.4, 0.7, 9});
  const auto id = Eigen::MatrixXd::Identity(9, 9);
  const auto e = effective_coupling(c, id, id);
  EXPECT_EQ(e.f_tilde, c.f);
  EXPECT_EQ(e.g_tilde, c.g);
  EXPECT_EQ(e.t_tilde, c.t);
}

TEST(EffectiveCoupling, FullUnravelGivesIndependentAttenuators) {
  for (double eps : {0.1, 0.5, 0.9}) {
    for (double eta : {0.2, 0.8}) {
      const auto c = build_coupling({eps, eta, 64});
      const auto r = svd_unravel(c.f);
      const auto e = effective_coupling(c, r.u_matrix, r.v_matrix);
      EXPECT_LE(max_off_diagonal(e.f_tilde), 1e-10);
      const Eigen::VectorXd env = e.g_tilde.rowwise().squaredNorm() + e.t_tilde.cwiseAbs2();
      for (Eigen::Index k = 0; k < 64; ++k) EXPECT_NEAR(env(k), 1.0 - r.eta_eff(k), 1e-10);
    }
  }
}

TEST(EffectiveCoupling, StaircaseMatchesDenseTripleProduct) {
  const auto c = build_coupling({0.5, 0.5, 16});
  const auto pre = staircase(rotation2(0.4), 16);
  const auto post = staircase(rotation2(0.4), 16);
  const auto e = effective_coupling(c, pre, post);

  const Eigen::MatrixXd u = pre.matrix();
  const Eigen::MatrixXd v = post.matrix();
  Eigen::MatrixXd f_expected = Eigen::MatrixXd::Zero(16, 16);
  for (int k = 0; k < 16; ++k)
    for (int j = 0; j < 16; ++j)
      for (int l = 0; l < 16; ++l)
        for (int m = 0; m < 16; ++m) f_expected(k, j) += v(k, l) * c.f(l, m) * u(j, m);
  EXPECT_LE((e.f_tilde - f_expected).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE(row_norm_defect(e), 1e-12);

  const auto dense = effective_coupling(c, u, v);
  EXPECT_LE((dense.f_tilde - e.f_tilde).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE((dense.g_tilde - e.g_tilde).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE((dense.t_tilde - e.t_tilde).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(EffectiveCoupling, RowNormPreservedUnderRandomOrthogonal) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g;
  const auto c = build_coupling({0.8, 0.3, 20});
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd a(20, 20), b(20, 20);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      a.data()[i] = g(rng);
      b.data()[i] = g(rng);
    }
    const Eigen::MatrixXd pre = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
    const Eigen::MatrixXd post = Eigen::HouseholderQR<Eigen::MatrixXd>(b).householderQ();
    EXPECT_LE(row_norm_defect(effective_coupling(c, pre, post)), 1e-12);
  }
}

TEST(EffectiveCoupling, RejectsBadProcessing) {
  const auto c = build_coupling({0.5, 0.5, 4});
  const auto id4 = Eigen::MatrixXd::Identity(4, 4);
  EXPECT_THROW((void)effective_coupling(c, Eigen::MatrixXd::Identity(3, 3), id4), DimensionError);
  EXPECT_THROW((void)effective_coupling(c, id4, Eigen::MatrixXd(2.0 * id4)), ParameterError);
  EXPECT_THROW((void)effective_coupling(c, staircase(rotation2(0.1), 5), staircase(rotation2(0.1), 4)),
               DimensionError);
}

TEST(DiagonalTolerance, ScalesPast256) {
  EXPECT_EQ(diagonal_tolerance(64), 1e-10);
  EXPECT_EQ(diagonal_tolerance(256), 1e-10);
  EXPECT_DOUBLE_EQ(diagonal_tolerance(512), 2e-10);
}
