#include <cmath>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "muonad/error.hpp"
#include "muonad/muon.hpp"
#include "muonad/rng.hpp"

using namespace muonad;

namespace {

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m(i, j) = t(i, j);
  return m;
}

Tensor from_eigen(const Eigen::MatrixXd& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t(i, j) = m(i, j);
  return t;
}

Eigen::MatrixXd polar_factor(const Tensor& g) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(g), Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().transpose();
}

double orthogonality_defect(const Tensor& o) {
  const Eigen::MatrixXd m = to_eigen(o);
  const bool wide = m.rows() <= m.cols();
  const Eigen::MatrixXd gram = wide ? Eigen::MatrixXd(m * m.transpose()) : Eigen::MatrixXd(m.transpose() * m);
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).norm();
}

// Random matrix with prescribed singular values drawn log-uniformly in [lo, hi].
Tensor with_spectrum(SeededRng& rng, std::size_t r, std::size_t c, double lo, double hi) {
  const Eigen::MatrixXd a = to_eigen(draw_normal(rng, {r, r}));
  const Eigen::MatrixXd b = to_eigen(draw_normal(rng, {c, c}));
  const Eigen::MatrixXd u = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
  const Eigen::MatrixXd v = Eigen::HouseholderQR<Eigen::MatrixXd>(b).householderQ();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(r, c);
  for (std::size_t i = 0; i < std::min(r, c); ++i) s(i, i) = lo * std::pow(hi / lo, rng.uniform());
  return from_eigen(u * s * v.transpose());
}

}  // namespace

TEST(NewtonSchulz, IdentityIsFixedPoint) {
  EXPECT_LE(max_abs_diff(newton_schulz_orthogonalize(Tensor::identity(4), 5), Tensor::identity(4)), 1e-6);
}

TEST(NewtonSchulz, DiagonalMapsToIdentity) {
  const Tensor o = newton_schulz_orthogonalize(Tensor::matrix({{2, 0}, {0, 0.5}}), 5);
  EXPECT_LE(frobenius_norm(o - Tensor::identity(2)), 0.05);
}

TEST(NewtonSchulz, TallRandomMatchesSvd) {
  SeededRng rng(7);
  const Tensor g = draw_normal(rng, {8, 4});
  const Tensor o = newton_schulz_orthogonalize(g, 5);
  EXPECT_EQ(o.shape(), g.shape());
  EXPECT_LE(orthogonality_defect(o), 0.05 * 2);
  EXPECT_LE((to_eigen(o) - polar_factor(g)).norm() / 2.0, 0.05);
}

TEST(NewtonSchulz, ZeroMatrixIsDegenerate) {
  try {
    newton_schulz_orthogonalize(Tensor::zeros({3, 3}), 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "degenerate gradient");
  }
}

TEST(NewtonSchulz, ScaleInvariant) {
  SeededRng rng(8);
  for (int i = 0; i < 50; ++i) {
    const Tensor g = draw_normal(rng, {5, 7});
    const double a = std::exp(rng.uniform(-5.0, 5.0));
    EXPECT_LE(max_abs_diff(newton_schulz_orthogonalize(a * g, 5), newton_schulz_orthogonalize(g, 5)), 1e-6);
  }
}

TEST(NewtonSchulz, WellConditionedSuite) {
  SeededRng rng(9);
  for (int i = 0; i < 200; ++i) {
    const std::size_t r = 1 + static_cast<std::size_t>(rng.uniform() * 32);
    const std::size_t c = 1 + static_cast<std::size_t>(rng.uniform() * 32);
    const Tensor g = with_spectrum(rng, r, c, 0.1, 10.0);
    const Tensor o = newton_schulz_orthogonalize(g, 5);
    const double k = static_cast<double>(std::min(r, c));
    ASSERT_LE(orthogonality_defect(o) / std::sqrt(k), 0.05) << r << "x" << c;
    ASSERT_LE((to_eigen(o) - polar_factor(g)).norm() / std::sqrt(k), 0.05) << r << "x" << c;
  }
}

TEST(MuonStep, ZeroGradientZeroMomentumIsNullStep) {
  const Tensor p = Tensor::matrix({{1, 2}, {3, 4}});
  const MuonResult r = muon_step(MuonState::for_param(p), p, Tensor::zeros({2, 2}), 0.1);
  EXPECT_EQ(r.param, p);
  EXPECT_EQ(r.state.step_count, 1u);
}

TEST(MuonStep, OrthogonalGradientScaledStep) {
  const double c = std::cos(0.3), s = std::sin(0.3);
  const Tensor q = Tensor::matrix({{c, -s}, {s, c}});
  const Tensor p = Tensor::zeros({2, 2});
  const MuonResult r = muon_step(MuonState::for_param(p, 0.0), p, q, 1.0);
  EXPECT_LE(max_abs_diff(r.delta, (0.2 * std::sqrt(2.0)) * q), 1e-4);
  EXPECT_LE(max_abs_diff(r.param, p - r.delta), 0.0);
}

TEST(MuonStep, MomentumRecurrence) {
  SeededRng rng(10);
  const Tensor g = draw_normal(rng, {3, 5});
  const Tensor p = draw_normal(rng, {3, 5});
  const MuonResult r1 = muon_step(MuonState::for_param(p, 0.95), p, g, 0.01);
  const MuonResult r2 = muon_step(r1.state, r1.param, g, 0.01);
  EXPECT_LE(max_abs_diff(r2.state.momentum, 1.95 * g), 1e-15);
  EXPECT_EQ(r2.state.step_count, 2u);
}

TEST(MuonStep, RejectsBadArguments) {
  const Tensor p = Tensor::zeros({2, 3});
  EXPECT_THROW(muon_step(MuonState::for_param(p), p, Tensor::zeros({3, 2}), 0.1), Error);
  EXPECT_THROW(muon_step(MuonState::for_param(p), p, Tensor::zeros({2, 3}), 0.0), Error);
  EXPECT_THROW(MuonState::for_param(p, 1.0), Error);
}

TEST(MuonStep, UpdateScale) {
  EXPECT_DOUBLE_EQ(muon_update_scale(Tensor::zeros({4, 16})), 0.8);
  EXPECT_DOUBLE_EQ(muon_update_scale(Tensor::zeros({9, 2})), 0.6);
}

TEST(LatentUpdate, ZeroGradientLeavesLatent) {
  SeededRng rng(11);
  const Tensor z = draw_normal(rng, {4, 6});
  EXPECT_EQ(latent_update(MuonState::for_param(z), z, Tensor::zeros({4, 6}), 0.01).param, z);
}

TEST(LatentUpdate, RmsMatchesContract) {
  SeededRng rng(12);
  Tensor z = draw_normal(rng, {8, 16});
  z = (2.0 / rms(z)) * z;
  const MuonResult r = latent_update(MuonState::for_param(z), z, draw_normal(rng, {8, 16}), 0.001);
  EXPECT_NEAR(rms(r.delta), 0.002, 1e-9);
  EXPECT_LE(max_abs_diff(r.param, z - r.delta), 0.0);
}

TEST(LatentUpdate, FloorEngagesAtZero) {
  SeededRng rng(13);
  const Tensor z = Tensor::zeros({4, 4});
  const MuonResult r = latent_update(MuonState::for_param(z), z, draw_normal(rng, {4, 4}), 0.01);
  EXPECT_NEAR(rms(r.delta), 0.01 * kLatentRmsFloor, 1e-15);
}

TEST(LatentUpdate, RandomRmsProperty) {
  SeededRng rng(14);
  MuonState st = MuonState::for_param(Tensor::zeros({6, 3}));
  Tensor z = draw_normal(rng, {6, 3});
  for (int i = 0; i < 100; ++i) {
    const double lr = rng.uniform(1e-4, 1e-1);
    const MuonResult r = latent_update(st, z, draw_normal(rng, {6, 3}), lr);
    EXPECT_NEAR(rms(r.delta), lr * std::max(rms(z), kLatentRmsFloor), 1e-9);
    st = r.state;
    z = r.param;
  }
}

TEST(AdamW, ZeroEverythingIsNullStep) {
  const Tensor p = Tensor::vector({1.0, -2.0});
  AdamWState st = AdamWState::for_param(p, 0.0);
  EXPECT_EQ(adamw_step(st, p, Tensor::vector({0.0, 0.0}), 0.1).param, p);
}

TEST(AdamW, FirstStepMovesByLr) {
  const Tensor p = Tensor::vector({0.0});
  const AdamWResult r = adamw_step(AdamWState::for_param(p, 0.0), p, Tensor::vector({1.0}), 0.1);
  EXPECT_NEAR(r.param[0], -0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_DOUBLE_EQ(r.state.second_moment[0], 0.001);
}

TEST(AdamW, DecoupledDecay) {
  const Tensor p = Tensor::vector({1.0});
  const AdamWResult r = adamw_step(AdamWState::for_param(p, 0.1), p, Tensor::vector({0.0}), 0.1);
  EXPECT_DOUBLE_EQ(r.param[0], 0.99);
}

TEST(AdamW, SecondMomentNonNegative) {
  SeededRng rng(15);
  Tensor p = draw_normal(rng, {3, 3});
  AdamWState st = AdamWState::for_param(p);
  for (int i = 0; i < 50; ++i) {
    AdamWResult r = adamw_step(st, p, draw_normal(rng, {3, 3}), 0.01);
    for (double v : r.state.second_moment.data()) ASSERT_GE(v, 0.0);
    st = r.state;
    p = r.param;
  }
  EXPECT_THROW(adamw_step(st, p, Tensor::zeros({9}), 0.01), Error);
}
