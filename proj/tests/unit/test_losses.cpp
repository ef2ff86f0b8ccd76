#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "pmn/errors.hpp"
#include "pmn/losses.hpp"

using namespace pmn;

namespace {

Tensor<double> two_points(double a0, double a1, double b0, double b1) {
  return Tensor<double>::matrix({{a0, a1}, {b0, b1}});
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.arch = ArchSpec::tiny();
  c.classes = 3;
  c.seed = 2;
  return c;
}

}  // namespace

TEST(CrossEntropy, ClosedForms) {
  const std::vector<int> first{0, 1};
  EXPECT_EQ(cross_entropy(Tensor<double>::matrix({{1, 0}, {0, 1}}), first), 0.0);
  const std::vector<int> one{0};
  EXPECT_NEAR(cross_entropy(Tensor<double>::matrix({{0.5, 0.5}}), one), std::log(2.0), 1e-15);
  EXPECT_NEAR(cross_entropy(Tensor<double>({1, 11}, 1.0 / 11.0), one), std::log(11.0), 1e-14);
  EXPECT_NEAR(cross_entropy(Tensor<double>::matrix({{0, 1}}), one), -std::log(kLogClamp), 1e-9);
}

TEST(CrossEntropy, LabelOutOfRange) {
  const std::vector<int> bad{2}, neg{-1};
  EXPECT_THROW(cross_entropy(Tensor<double>::matrix({{0.5, 0.5}}), bad), DataError);
  EXPECT_THROW(cross_entropy(Tensor<double>::matrix({{0.5, 0.5}}), neg), DataError);
}

TEST(Mse, HandValues) {
  const auto x = Tensor<double>::matrix({{1, 1}});
  EXPECT_EQ(reconstruction_mse(x, x), 0.0);
  EXPECT_EQ(reconstruction_mse(x, Tensor<double>::matrix({{0, 0}})), 2.0);
  EXPECT_EQ(reconstruction_mse(x, Tensor<double>::matrix({{-1, -1}})), 8.0);
  EXPECT_THROW(reconstruction_mse(x, Tensor<double>::matrix({{1, 1, 1}})), DimensionError);
}

TEST(Regularizers, HandExamples) {
  const auto z = two_points(0, 0, 2, 0);
  const auto p = two_points(0, 0, 3, 0);
  EXPECT_DOUBLE_EQ(r1_feature_to_prototype(z, p, Metric::sq_l2), 0.5);
  EXPECT_DOUBLE_EQ(r2_prototype_to_feature(z, p, Metric::sq_l2), 0.5);
  EXPECT_DOUBLE_EQ(r3_prototype_separation(p, Metric::sq_l2), -9.0);
  EXPECT_DOUBLE_EQ(r3_prototype_separation(two_points(1, 2, 1, 2), Metric::sq_l2), 0.0);
  EXPECT_DOUBLE_EQ(r1_feature_to_prototype(p, p, Metric::l1), 0.0);
}

TEST(Regularizers, Monotonicity) {
  Rng rng(8);
  const auto z = oracle::random_tensor({6, 3}, rng), p = oracle::random_tensor({3, 3}, rng);
  Tensor<double> more({4, 3});
  for (std::size_t i = 0; i < 9; ++i) more.values()[i] = p.values()[i];
  for (std::size_t i = 9; i < 12; ++i) more.values()[i] = 50.0;
  EXPECT_LE(r1_feature_to_prototype(z, more, Metric::sq_l2), r1_feature_to_prototype(z, p, Metric::sq_l2));

  const Tensor<double> subset({3, 3}, std::vector<double>(z.values().begin(), z.values().begin() + 9));
  EXPECT_LE(r2_prototype_to_feature(z, p, Metric::l1), r2_prototype_to_feature(subset, p, Metric::l1));

  auto spread = p;
  spread *= 2.0;
  EXPECT_LT(r3_prototype_separation(spread, Metric::sq_l2), r3_prototype_separation(p, Metric::sq_l2));
}

TEST(Regularizers, PermutationInvariant) {
  Rng rng(9);
  const auto z = oracle::random_tensor({5, 3}, rng), p = oracle::random_tensor({4, 3}, rng);
  Tensor<double> zr({5, 3}), pr({4, 3});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < 3; ++k) zr.at({i, k}) = z.at({4 - i, k});
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t k = 0; k < 3; ++k) pr.at({j, k}) = p.at({3 - j, k});
  for (Metric m : {Metric::sq_l2, Metric::l1, Metric::cosine}) {
    EXPECT_NEAR(r1_feature_to_prototype(z, p, m), r1_feature_to_prototype(zr, pr, m), 1e-14);
    EXPECT_NEAR(r2_prototype_to_feature(z, p, m), r2_prototype_to_feature(zr, pr, m), 1e-14);
  }
}

TEST(Regularizers, MatchBruteForce) {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(10), m = 2 + rng.uniform_index(4), q = 1 + rng.uniform_index(4);
    const auto z = oracle::random_tensor({n, q}, rng), p = oracle::random_tensor({m, q}, rng);
    for (Metric metric : {Metric::sq_l2, Metric::l1, Metric::cosine}) {
      EXPECT_NEAR(r1_feature_to_prototype(z, p, metric), oracle::brute_r1(oracle::to_mat(z), oracle::to_mat(p), metric), 1e-12);
      EXPECT_NEAR(r2_prototype_to_feature(z, p, metric), oracle::brute_r2(oracle::to_mat(z), oracle::to_mat(p), metric), 1e-12);
      EXPECT_NEAR(r3_prototype_separation(p, metric), oracle::brute_r3(oracle::to_mat(p), metric), 1e-12);
    }
  }
}

TEST(Regularizers, TiesRouteToLowestIndex) {
  // z sits at equal distance from both prototypes; only prototype 0 gets gradient.
  const auto z = Tensor<double>::matrix({{0, 0}});
  const auto p = two_points(1, 0, -1, 0);
  const auto t = r1_term(z, p, Metric::sq_l2);
  EXPECT_NE(t.d_prototypes.at({0, 0}), 0.0);
  EXPECT_EQ(t.d_prototypes.at({1, 0}), 0.0);
}

TEST(Regularizers, InvalidInputs) {
  EXPECT_THROW(r3_prototype_separation(Tensor<double>::matrix({{1, 2}}), Metric::sq_l2), ConfigError);
  EXPECT_THROW(r1_feature_to_prototype(Tensor<double>(), Tensor<double>::matrix({{1, 2}}), Metric::sq_l2), UsageError);
}

TEST(TotalLoss, BreakdownResums) {
  PmnModel<double> model(tiny_config());
  Rng rng(11);
  const auto x = oracle::random_tensor({5, model.input_length()}, rng, 0.0, 1.0);
  const std::vector<int> labels{0, 1, 2, 0, 1};
  const LossWeights w;
  const auto b = total_loss(model, x, labels, w);
  EXPECT_NEAR(b.total, b.cla + w.recon * b.recon + w.r1 * b.r1 + w.r2 * b.r2 + w.r3 * b.r3, 1e-12);
  EXPECT_NEAR(b.total, b.weighted_sum(w), 1e-12);
  EXPECT_TRUE(std::isfinite(b.total));

  const LossWeights zero{0, 0, 0, 0};
  const auto c = total_loss(model, x, labels, zero);
  EXPECT_EQ(c.total, c.cla);
}

TEST(TotalLoss, PopulatesPrototypeAndFcGradients) {
  PmnModel<double> model(tiny_config());
  Rng rng(12);
  const auto x = oracle::random_tensor({4, model.input_length()}, rng, 0.0, 1.0);
  const std::vector<int> labels{0, 1, 2, 0};
  total_loss(model, x, labels, LossWeights{});
  bool proto = false, fc = false;
  for (const auto& p : model.params()) {
    double norm = 0.0;
    for (double g : p.grad->values()) norm += g * g;
    if (p.name.find("prototypes") != std::string::npos) proto = norm > 0.0;
    if (p.name.find("fc_weight") != std::string::npos) fc = norm > 0.0;
  }
  EXPECT_TRUE(proto);
  EXPECT_TRUE(fc);
}

TEST(LossWeights, Validation) {
  EXPECT_NO_THROW((LossWeights{1, 0.25, 0.25, 0.01}.validate()));
  EXPECT_THROW((LossWeights{-1, 0, 0, 0}.validate()), ConfigError);
  EXPECT_THROW((LossWeights{1, std::nan(""), 0, 0}.validate()), ConfigError);
}
