#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "pmn/errors.hpp"
#include "pmn/model.hpp"

using namespace pmn;

namespace {

ModelConfig tiny_config(std::uint64_t seed = 1, Metric metric = Metric::sq_l2) {
  ModelConfig c;
  c.arch = ArchSpec::tiny();
  c.classes = 3;
  c.metric = metric;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Distance, Examples) {
  const std::vector<double> a{1, 0}, b{0, 1}, z{0, 0};
  EXPECT_DOUBLE_EQ(distance<double>(a, b, Metric::cosine), 1.0);
  EXPECT_DOUBLE_EQ(distance<double>(a, b, Metric::sq_l2), 2.0);
  EXPECT_DOUBLE_EQ(distance<double>(a, b, Metric::l1), 2.0);
  EXPECT_THROW(distance<double>(z, b, Metric::cosine), DomainError);
}

TEST(Distance, MatchesOracleForAllMetrics) {
  Rng rng(2);
  for (Metric m : {Metric::sq_l2, Metric::l1, Metric::cosine}) {
    const auto z = oracle::random_tensor({4, 5}, rng), p = oracle::random_tensor({3, 5}, rng);
    const auto d = pm_layer(z, p, m);
    const auto zm = oracle::to_mat(z), pm = oracle::to_mat(p);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(d.at({i, j}), oracle::dist(zm[i], pm[j], m), 1e-14);
  }
}

TEST(PmLayer, HandExamples) {
  const auto p = Tensor<double>::matrix({{1, 0}, {0, 2}});
  EXPECT_EQ(pm_layer(Tensor<double>::matrix({{0, 0}}), p, Metric::sq_l2), Tensor<double>::matrix({{1, 4}}));
  EXPECT_EQ(pm_layer(Tensor<double>::matrix({{0, 2}}), p, Metric::sq_l2).at({0, 1}), 0.0);
  const auto swapped = Tensor<double>::matrix({{0, 2}, {1, 0}});
  EXPECT_EQ(pm_layer(Tensor<double>::matrix({{3, 1}}), swapped, Metric::l1), Tensor<double>::matrix({{4, 3}}));
  EXPECT_EQ(pm_layer(Tensor<double>::matrix({{3, 1}}), p, Metric::l1), Tensor<double>::matrix({{3, 4}}));
}

TEST(FcWeight, NegativeIdentityPattern) {
  EXPECT_EQ(init_fc_weight<double>(3, 3), Tensor<double>::matrix({{-1, 0, 0}, {0, -1, 0}, {0, 0, -1}}));
  EXPECT_EQ(init_fc_weight<double>(2, 4), Tensor<double>::matrix({{-1, 0, -1, 0}, {0, -1, 0, -1}}));
  const auto w = init_fc_weight<double>(3, 7);
  for (std::size_t j = 0; j < 7; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < 3; ++i) col += w.at({i, j});
    EXPECT_EQ(col, -1.0);
    EXPECT_EQ(w.at({prototype_class(j, 3), j}), -1.0);
  }
  EXPECT_THROW(init_fc_weight<double>(3, 2), ConfigError);
}

TEST(Softmax, ClosedForms) {
  const auto uniform = softmax_rows(Tensor<double>::matrix({{2, 2, 2, 2}}));
  for (double p : uniform.values()) EXPECT_DOUBLE_EQ(p, 0.25);
  const auto two = softmax_rows(Tensor<double>::matrix({{0, std::log(3.0)}}));
  EXPECT_NEAR(two.at({0, 0}), 0.25, 1e-15);
  EXPECT_NEAR(two.at({0, 1}), 0.75, 1e-15);
  const auto big = softmax_rows(Tensor<double>::matrix({{1000, 0}}));
  EXPECT_TRUE(std::isfinite(big.at({0, 1})));
}

TEST(Model, ShapeTraceCoversThirteenRows) {
  const PmnModel<float> model(ModelConfig{});
  const auto rows = model.shape_trace();
  ASSERT_EQ(rows.size(), 13u);
  EXPECT_EQ(rows[4].item_shape, (Shape{128, 4}));
  EXPECT_EQ(rows[5].item_shape, (Shape{64}));
  EXPECT_EQ(rows[11].item_shape, (Shape{1024}));
  EXPECT_EQ(rows[12].part, "Cla.");
}

TEST(Model, ClassifyIsConsistent) {
  PmnModel<double> model(tiny_config());
  Rng rng(3);
  const auto x = oracle::random_tensor({6, model.input_length()}, rng, 0.0, 1.0);
  const auto c = model.classify(x);
  for (std::size_t i = 0; i < 6; ++i) {
    double sum = 0.0;
    for (double p : c.probabilities.row(i)) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-9);
    // W = -I: the largest logit belongs to the closest prototype.
    EXPECT_EQ(c.predictions[i], argmin(std::span<const double>(c.distances.row(i))));
  }
  EXPECT_EQ(model.reconstruct(x).shape(), x.shape());
}

TEST(Model, SameSeedSameInitialization) {
  PmnModel<double> a(tiny_config(5)), b(tiny_config(5)), c(tiny_config(6));
  Rng rng(4);
  const auto x = oracle::random_tensor({2, a.input_length()}, rng);
  EXPECT_EQ(a.reconstruct(x), b.reconstruct(x));
  EXPECT_NE(a.reconstruct(x), c.reconstruct(x));
}

TEST(Model, LinearEquivalentLogitsMatchSoftmax) {
  PmnModel<double> model(tiny_config());
  Rng rng(5);
  const auto z = oracle::random_tensor({10, model.latent_dim()}, rng);
  const auto direct = softmax_rows(model.logits_from_latent(z));
  const auto linear = softmax_rows(model.linear_equivalent_logits(z));
  EXPECT_LT(max_abs_difference(direct, linear), 1e-12);

  PmnModel<double> cosine(tiny_config(1, Metric::cosine));
  EXPECT_THROW(cosine.linear_equivalent_logits(z), ConfigError);
  model.prototype_head().fc_weight().at({0, 1}) = 0.5;
  EXPECT_THROW(model.linear_equivalent_logits(z), ConfigError);
}

TEST(Model, LatentOnPrototypeHasZeroDistance) {
  PmnModel<double> model(tiny_config());
  const auto& p = model.prototype_head().prototypes();
  const Tensor<double> z({1, p.dim(1)}, std::vector<double>(p.row(2).begin(), p.row(2).end()));
  const auto c = model.classify_latent(z);
  EXPECT_EQ(c.distances.at({0, 2}), 0.0);
  EXPECT_EQ(c.predictions[0], 2u);
}

TEST(Model, RejectsWrongInputLength) {
  const PmnModel<double> model(tiny_config());
  EXPECT_THROW(model.classify(Tensor<double>({1, model.input_length() + 1})), DimensionError);
}

TEST(Model, BaselineHasNoPrototypes) {
  auto cfg = tiny_config();
  cfg.variant = Variant::ae_mlp;
  PmnModel<double> model(cfg);
  EXPECT_FALSE(model.has_prototypes());
  EXPECT_THROW(model.prototype_head(), ConfigError);
  Rng rng(6);
  EXPECT_EQ(model.classify(oracle::random_tensor({2, model.input_length()}, rng)).logits.shape(), (Shape{2, 3}));
}

TEST(Model, ArchValidationRejectsBrokenChain) {
  ArchSpec a = ArchSpec::standard();
  a.decoder_stages.pop_back();
  EXPECT_THROW(a.validate(), ConfigError);
}
