#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "muonad/error.hpp"
#include "muonad/pruning.hpp"
#include "muonad/rng.hpp"

using namespace muonad;

TEST(AttentionEntropy, Examples) {
  EXPECT_NEAR(attention_entropy(Tensor({4, 4}, 0.25)), std::log(4.0), 1e-15);
  EXPECT_EQ(attention_entropy(Tensor::identity(3)), 0.0);
  EXPECT_NEAR(attention_entropy(Tensor::matrix({{0.5, 0.25, 0.25}})), 1.5 * std::log(2.0), 1e-15);
  EXPECT_THROW(attention_entropy(Tensor::matrix({{0.5, 0.6}})), Error);
}

TEST(AttentionEntropy, BoundedByLogN) {
  SeededRng rng(41);
  for (int i = 0; i < 500; ++i) {
    const Tensor p = softmax_rows(draw_normal(rng, {5, 5}));
    const double h = attention_entropy(p);
    ASSERT_GE(h, 0.0);
    ASSERT_LT(h, std::log(5.0));
  }
}

TEST(KeepLayers, Examples) {
  const std::vector<double> h = {1.0, 0.6, 0.8};
  EXPECT_EQ(keep_layers(h, 0.7).bits, (std::vector<std::uint8_t>{1, 0, 1}));
  const std::vector<double> eq = {0.4, 0.4, 0.4};
  EXPECT_TRUE(keep_layers(eq, 0.7).all_kept());
  const std::vector<double> one = {0.3};
  EXPECT_TRUE(keep_layers(one, 0.7).all_kept());
  EXPECT_TRUE(keep_layers(eq, 1.0).all_kept());
  EXPECT_THROW(keep_layers(std::vector<double>{}, 0.7), Error);
}

TEST(KeepLayers, BruteForceAndScaleInvariance) {
  SeededRng rng(42);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> h(1 + static_cast<std::size_t>(rng.uniform() * 10));
    for (auto& v : h) v = rng.uniform(0.0, 3.0);
    const double mx = *std::max_element(h.begin(), h.end());
    const PruneMask m = keep_layers(h, 0.7);
    for (std::size_t j = 0; j < h.size(); ++j) ASSERT_EQ(m.bits[j], h[j] > 0.7 * mx ? 1 : 0);
    ASSERT_GE(m.count_kept(), 1u);
    std::vector<double> scaled = h;
    const double a = rng.uniform(0.01, 100.0);
    for (auto& v : scaled) v *= a;
    ASSERT_EQ(keep_layers(scaled, 0.7), m);
  }
}

TEST(ChannelImportance, Examples) {
  PruneConfig cfg;
  const ImportanceScores z =
      channel_importance(Tensor::vector({0.0}), Tensor::vector({0.0}), ImportanceScores{}, cfg);
  EXPECT_EQ(z.scores[0], 0.0);

  cfg.lambda_decay = 0.1;
  cfg.epsilon = 1e-300;
  const ImportanceScores s =
      channel_importance(Tensor::vector({3.0}), Tensor::vector({2.0}), ImportanceScores{}, cfg);
  EXPECT_NEAR(s.scores[0], 1.4, 1e-15);
}

TEST(ChannelImportance, ConstantStreamConverges) {
  PruneConfig cfg;
  cfg.lambda_decay = 0.05;
  const Tensor g = Tensor::vector({0.3, -2.0, 7.0});
  const Tensor w = Tensor::vector({1.0, -0.5, 2.0});
  ImportanceScores st;
  for (std::size_t i = 0; i < cfg.window + 5; ++i) st = channel_importance(g, w, st, cfg);
  EXPECT_EQ(st.grad_sq_window.size(), cfg.window);
  for (std::size_t i = 0; i < 3; ++i) {
    const double a = std::abs(g[i]);
    EXPECT_NEAR(st.scores[i], a / (a + cfg.epsilon) + 0.05 * w[i] * w[i], 1e-14);
  }
}

TEST(ChannelImportance, WindowMeanAndNonNegativity) {
  PruneConfig cfg;
  cfg.window = 3;
  SeededRng rng(43);
  ImportanceScores st;
  std::vector<Tensor> hist;
  const Tensor w = draw_normal(rng, {2, 2});
  for (int i = 0; i < 8; ++i) {
    const Tensor g = draw_normal(rng, {2, 2});
    hist.push_back(hadamard(g, g));
    st = channel_importance(g, w, st, cfg);
    for (std::size_t k = 0; k < 4; ++k) {
      double m = 0.0;
      const std::size_t lo = hist.size() > 3 ? hist.size() - 3 : 0;
      for (std::size_t j = lo; j < hist.size(); ++j) m += hist[j][k];
      m /= static_cast<double>(hist.size() - lo);
      const double expect = std::abs(g[k]) / (std::sqrt(m) + cfg.epsilon) + cfg.lambda_decay * w[k] * w[k];
      ASSERT_NEAR(st.scores[k], expect, 1e-12);
      ASSERT_GE(st.scores[k], 0.0);
    }
  }
  EXPECT_THROW(channel_importance(Tensor::vector({1}), Tensor::vector({1, 2}), st, cfg), Error);
}

TEST(BinarizeMask, Examples) {
  const Tensor s = Tensor::vector({1, 2, 3, 4});
  EXPECT_EQ(binarize_mask(s, 0.0).bits, (std::vector<std::uint8_t>{0, 0, 1, 1}));
  EXPECT_EQ(binarize_mask(s, 10.0).count_kept(), 0u);
  EXPECT_TRUE(binarize_mask(s, -10.0).all_kept());
  EXPECT_THROW(binarize_mask(Tensor(), 0.0), Error);
}

TEST(BinarizeMask, BruteForceAndShiftInvariance) {
  SeededRng rng(44);
  for (int i = 0; i < 1000; ++i) {
    const Tensor s = draw_uniform(rng, {1 + static_cast<std::size_t>(rng.uniform() * 20)}, 0.0, 5.0);
    const double k = rng.uniform(-2.0, 2.0);
    double mu = 0.0;
    for (double v : s.data()) mu += v;
    mu /= static_cast<double>(s.size());
    double var = 0.0;
    for (double v : s.data()) var += (v - mu) * (v - mu);
    const double eta = mu + k * std::sqrt(var / static_cast<double>(s.size()));
    const PruneMask m = binarize_mask(s, k);
    for (std::size_t j = 0; j < s.size(); ++j) ASSERT_EQ(m.bits[j], s[j] < eta ? 0 : 1);
    Tensor shifted = s;
    for (auto& v : shifted.values()) v += 8.0;
    const PruneMask ms = binarize_mask(shifted, k);
    std::size_t differ = 0;
    for (std::size_t j = 0; j < s.size(); ++j) differ += ms.bits[j] != m.bits[j];
    ASSERT_EQ(differ, 0u);
  }
}

TEST(RetentionSchedule, Endpoints) {
  EXPECT_EQ(retention_schedule(0, 3000), 0.95);
  EXPECT_EQ(retention_schedule(3000, 3000), 0.40);
  EXPECT_NEAR(retention_schedule(1500, 3000), 0.675, 1e-15);
  EXPECT_EQ(retention_schedule(5000, 3000), 0.40);
  EXPECT_THROW(retention_schedule(0, 0), Error);
  EXPECT_EQ(retention_schedule(10, 10, 0.9, 0.2), 0.2);
}

TEST(TopFractionMask, KeepsHighestScores) {
  const Tensor s = Tensor::vector({0.1, 0.9, 0.5, 0.5, 0.2});
  EXPECT_EQ(top_fraction_mask(s, 0.4).bits, (std::vector<std::uint8_t>{0, 1, 1, 0, 0}));
  EXPECT_EQ(top_fraction_mask(s, 0.5).count_kept(), 3u);
  EXPECT_EQ(top_fraction_mask(s, 0.0).count_kept(), 0u);
}

TEST(MemoryEff, Examples) {
  const std::vector<Tensor> w = {Tensor({2, 2}, 1.5), Tensor({3}, -2.0)};
  const std::vector<PruneMask> ones = {PruneMask::all_ones(4), PruneMask::all_ones(3)};
  MemoryEff full = memory_eff(ones, w, 2, 2);
  EXPECT_EQ(full.density, 1.0);
  EXPECT_EQ(full.bytes, 4.0 * 7);
  const std::vector<PruneMask> zeros = {PruneMask{std::vector<std::uint8_t>(4, 0)},
                                        PruneMask{std::vector<std::uint8_t>(3, 0)}};
  MemoryEff none = memory_eff(zeros, w, 2, 2);
  EXPECT_EQ(none.density, 0.0);
  EXPECT_EQ(none.bytes, 0.0);
  const std::vector<Tensor> w2 = {Tensor({2, 2}, 1.0)};
  const std::vector<PruneMask> half = {PruneMask{{1, 0, 1, 0}}};
  EXPECT_EQ(memory_eff(half, w2, 2, 2).density, 0.5);
  EXPECT_THROW(memory_eff(half, w, 2, 2), Error);
}

TEST(MemoryEff, BruteForceCounts) {
  SeededRng rng(45);
  for (int i = 0; i < 100; ++i) {
    std::vector<Tensor> ws;
    std::vector<PruneMask> ms;
    std::size_t nnz = 0, total = 0;
    for (int l = 0; l < 3; ++l) {
      Tensor w = draw_normal(rng, {4, 3});
      PruneMask m{std::vector<std::uint8_t>(12)};
      for (std::size_t j = 0; j < 12; ++j) {
        if (rng.uniform() < 0.2) w[j] = 0.0;
        m.bits[j] = rng.uniform() < 0.5;
        nnz += (m.bits[j] && w[j] != 0.0);
      }
      total += 12;
      ws.push_back(w);
      ms.push_back(m);
    }
    const MemoryEff e = memory_eff(ms, ws, 2, 4);
    ASSERT_EQ(e.density, static_cast<double>(nnz) / static_cast<double>(total));
    ASSERT_EQ(e.bytes, e.density * static_cast<double>(total) * 6.0);
  }
}

TEST(PruneMask, JsonForm) {
  EXPECT_EQ(mask_to_json("layer0.value", PruneMask{{1, 0, 1}}), R"({"bits":[1,0,1],"layer":"layer0.value"})");
  EXPECT_EQ(PruneMask::all_ones(3).as_tensor({3}), Tensor({3}, 1.0));
}

TEST(PruneConfig, Validation) {
  PruneConfig c;
  c.beta = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = PruneConfig{};
  c.window = 0;
  EXPECT_THROW(c.validate(), Error);
}
