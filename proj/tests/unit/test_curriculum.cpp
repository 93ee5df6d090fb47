#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "muonad/curriculum.hpp"
#include "muonad/error.hpp"
#include "muonad/rng.hpp"

using namespace muonad;

TEST(PhaseOf, Boundaries) {
  EXPECT_EQ(phase_of(0), Phase::I);
  EXPECT_EQ(phase_of(499), Phase::I);
  EXPECT_EQ(phase_of(500), Phase::II);
  EXPECT_EQ(phase_of(1499), Phase::II);
  EXPECT_EQ(phase_of(1500), Phase::III);
  EXPECT_EQ(phase_of(2999), Phase::III);
  EXPECT_THROW(phase_of(-1), Error);
}

TEST(PhaseOf, Monotone) {
  for (std::int64_t t = 1; t < 4000; ++t) ASSERT_LE(static_cast<int>(phase_of(t - 1)), static_cast<int>(phase_of(t)));
}

TEST(UpdateLambda, Examples) {
  EXPECT_EQ(update_lambda_style(0.8, 0.0, 0.1), 0.8);
  EXPECT_NEAR(update_lambda_style(0.8, 1.2, 0.1), 0.8 * std::exp(-0.12), 1e-15);
  EXPECT_NEAR(update_lambda_style(0.8, 1.2, 0.1), 0.70954, 1e-5);
  EXPECT_GT(update_lambda_style(0.8, -0.5, 0.1), 0.8);
  EXPECT_EQ(update_lambda_style(5.0, -1000.0, 0.1), kLambdaMax);
  EXPECT_EQ(update_lambda_style(0.5, 1000.0, 0.1), kLambdaMin);
  EXPECT_THROW(update_lambda_style(0.0, 1.0, 0.1), Error);
}

TEST(UpdateLambda, MonotoneInDelta) {
  SeededRng rng(61);
  for (int i = 0; i < 1000; ++i) {
    const double lam = rng.uniform(1e-3, 5.0);
    const double eta = rng.uniform(0.01, 1.0);
    double d1 = rng.uniform(-5.0, 5.0), d2 = rng.uniform(-5.0, 5.0);
    if (d1 > d2) std::swap(d1, d2);
    ASSERT_GE(update_lambda_style(lam, d1, eta), update_lambda_style(lam, d2, eta));
  }
}

TEST(MaskK, PerPhase) {
  EXPECT_EQ(mask_k_for_phase(Phase::I), -1.5);
  EXPECT_EQ(mask_k_for_phase(Phase::II), 0.5);
  EXPECT_EQ(mask_k_for_phase(Phase::III), 1.2);
}

TEST(LrSchedule, EndpointsAndShape) {
  EXPECT_EQ(lr_schedule(0, 3000), 0.001);
  EXPECT_EQ(lr_schedule(3000, 3000), 0.0001);
  EXPECT_NEAR(lr_schedule(1500, 3000), std::sqrt(0.001 * 0.0001), 1e-15);
  for (std::uint64_t t = 1; t <= 3000; ++t) ASSERT_LT(lr_schedule(t, 3000), lr_schedule(t - 1, 3000));
  EXPECT_THROW(lr_schedule(0, 0), Error);
}

TEST(Step, PhaseOneHoldsLambda) {
  CurriculumState s = CurriculumState::initial(3000);
  s = step(s, 10.0);
  s = step(s, 5.0);
  EXPECT_EQ(s.iteration, 2u);
  EXPECT_EQ(s.lambda_style, 0.8);
  EXPECT_EQ(s.phase, Phase::I);
  EXPECT_FALSE(s.freeze_style);
}

TEST(Step, RisingDistanceInPhaseTwoLowersLambda) {
  CurriculumState s = CurriculumState::initial(3000);
  for (int i = 0; i < 500; ++i) s = step(s, 1.0);
  EXPECT_EQ(s.phase, Phase::II);
  EXPECT_EQ(s.lambda_style, 0.8);
  s = step(s, 2.0);
  EXPECT_NEAR(s.lambda_style, 0.8 * std::exp(-0.1), 1e-15);
}

TEST(Step, PhaseThreeFlags) {
  CurriculumState s = CurriculumState::initial(3000);
  for (int i = 0; i < 1500; ++i) s = step(s, 1.0);
  EXPECT_EQ(s.phase, Phase::III);
  EXPECT_TRUE(s.freeze_style);
  EXPECT_TRUE(s.balance_gradients);
  const double lam = s.lambda_style;
  s = step(s, 5.0);
  EXPECT_EQ(s.lambda_style, lam);
  EXPECT_EQ(s.lr, lr_schedule(1501, 3000));
}

TEST(Step, ReplayIsDeterministic) {
  SeededRng rng(62);
  std::vector<double> vals(3000);
  for (auto& v : vals) v = rng.uniform(0.0, 3.0);
  CurriculumState a = CurriculumState::initial(3000), b = a;
  for (double v : vals) {
    a = step(a, v);
    b = step(b, v);
    ASSERT_EQ(a, b);
    ASSERT_GT(a.lambda_style, 0.0);
    ASSERT_EQ(a.phase, phase_of(static_cast<std::int64_t>(a.iteration)));
  }
}
