#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "oracles.hpp"
#include "pmn/errors.hpp"
#include "pmn/interpret.hpp"

using namespace pmn;

namespace {

ModelConfig tiny_config(std::uint64_t seed = 6) {
  ModelConfig c;
  c.arch = ArchSpec::tiny();
  c.classes = 3;
  c.seed = seed;
  return c;
}

std::vector<double> random_sample(std::size_t n, Rng& rng) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.uniform();
  return x;
}

}  // namespace

TEST(Upsample, PeaksAtCellCenters) {
  const std::vector<double> coarse{0, 1, 0, 0};
  const auto up = upsample_linear(coarse, 16);
  ASSERT_EQ(up.size(), 16u);
  // Cell 1 covers bins 4..7 with its center between bins 5 and 6.
  EXPECT_DOUBLE_EQ(up[5], up[6]);
  EXPECT_EQ(std::max_element(up.begin(), up.end()) - up.begin(), 5);
  EXPECT_DOUBLE_EQ(up[5], 0.875);
  EXPECT_EQ(up[12], 0.0);
}

TEST(Upsample, ConstantInteriorAndZeroPaddedEdges) {
  const auto up = upsample_linear(std::vector<double>{2, 2, 2, 2}, 16);
  for (std::size_t i = 2; i < 14; ++i) EXPECT_DOUBLE_EQ(up[i], 2.0);
  EXPECT_DOUBLE_EQ(up[0], 2.0 * 0.625);
  EXPECT_DOUBLE_EQ(up[15], 2.0 * 0.625);
  EXPECT_EQ(upsample_linear(std::vector<double>{3.0}, 1), (std::vector<double>{3.0}));
  EXPECT_THROW(upsample_linear(std::vector<double>{}, 4), DimensionError);
}

TEST(TopBins, HighestFirstAndTiesByIndex) {
  const std::vector<double> s{0.1, 0.9, 0.5, 0.9, 0.0};
  EXPECT_EQ(top_bins(s, 3), (std::vector<std::size_t>{1, 3, 2}));
  EXPECT_EQ(top_bins(s, 10).size(), 5u);
}

TEST(GradCam, FullLengthMapInUnitRange) {
  ModelConfig c;
  c.seed = 3;
  PmnModel<float> model(c);
  Rng rng(1);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<float> x(1024);
    for (auto& v : x) v = static_cast<float>(rng.uniform());
    const auto map = grad_cam<float>(model, x);
    ASSERT_EQ(map.scores.size(), 1024u);
    EXPECT_EQ(map.coarse.size(), model.feature_maps(Tensor<float>({1, 1024}, x)).dim(2));
    for (double v : map.scores) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    if (!map.degenerate) EXPECT_DOUBLE_EQ(*std::max_element(map.scores.begin(), map.scores.end()), 1.0);
  }
}

TEST(GradCam, GradientScaleDoesNotChangeMap) {
  PmnModel<double> model(tiny_config());
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_sample(model.input_length(), rng);
    const auto a = grad_cam<double>(model, x);
    const auto b = grad_cam<double>(model, x, 2.0);
    EXPECT_EQ(a.target_class, b.target_class);
    for (std::size_t i = 0; i < a.scores.size(); ++i) EXPECT_NEAR(a.scores[i], b.scores[i], 1e-12);
  }
}

TEST(GradCam, TargetsPredictedClass) {
  PmnModel<double> model(tiny_config());
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_sample(model.input_length(), rng);
    const auto c = model.classify(Tensor<double>({1, x.size()}, x));
    EXPECT_EQ(grad_cam<double>(model, x).target_class, c.predictions.front());
  }
}

TEST(GradCam, ChannelWeightsMatchFiniteDifferences) {
  PmnModel<double> model(tiny_config());
  Rng rng(4);
  const auto x = random_sample(model.input_length(), rng);
  Tensor<double> maps = model.feature_maps(Tensor<double>({1, x.size()}, x));
  for (std::size_t k = 0; k < model.classes(); ++k) {
    const auto grad = model.feature_map_gradient(maps, k);
    const auto numeric = oracle::numeric_gradient(maps, [&] { return model.logits_from_feature_maps(maps).at({0, k}); }, 1e-6);
    const std::size_t channels = maps.dim(1), length = maps.dim(2);
    for (std::size_t ch = 0; ch < channels; ++ch) {
      double analytic = 0.0, fd = 0.0;
      for (std::size_t t = 0; t < length; ++t) {
        analytic += grad.at({0, ch, t});
        fd += numeric[ch * length + t];
      }
      EXPECT_NEAR(analytic / static_cast<double>(length), fd / static_cast<double>(length), 1e-3) << "class " << k << " channel " << ch;
    }
  }
}

TEST(ExplainMatch, MatchedIsArgminAndAgreesWithPrediction) {
  PmnModel<double> model(tiny_config());
  Rng rng(5);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto x = random_sample(model.input_length(), rng);
    const auto e = explain_match<double>(model, x, i);
    ASSERT_EQ(e.distances.size(), model.prototype_count());
    EXPECT_EQ(e.matched_prototype, static_cast<std::size_t>(std::min_element(e.distances.begin(), e.distances.end()) - e.distances.begin()));
    EXPECT_EQ(e.matched_class, e.matched_prototype % model.classes());
    EXPECT_EQ(e.matched_class, e.predicted_class);
    EXPECT_EQ(e.decoded_prototype.size(), model.input_length());
    EXPECT_EQ(e.sample_id, i);
  }
}

TEST(ExplainMatch, LatentOnPrototypeHasZeroDistance) {
  PmnModel<double> model(tiny_config());
  Rng rng(6);
  const auto x = random_sample(model.input_length(), rng);
  const auto z = model.encode(Tensor<double>({1, x.size()}, x));
  auto& protos = model.prototype_head().prototypes();
  for (std::size_t d = 0; d < z.dim(1); ++d) protos.at({1, d}) = z.at({0, d});
  const auto e = explain_match<double>(model, x);
  EXPECT_EQ(e.matched_prototype, 1u);
  EXPECT_NEAR(e.distances[1], 0.0, 1e-12);
}

TEST(ExplainMatch, BaselineRejected) {
  auto c = tiny_config();
  c.variant = Variant::ae_mlp;
  PmnModel<double> model(c);
  const std::vector<double> x(model.input_length(), 0.5);
  EXPECT_THROW(explain_match<double>(model, x), UsageError);
  EXPECT_THROW(decode_prototypes(model), UsageError);
}

TEST(DecodePrototypes, OneRowPerPrototypeDeterministic) {
  auto c = tiny_config();
  c.prototypes = 6;
  PmnModel<double> model(c);
  const auto a = decode_prototypes(model);
  EXPECT_EQ(a.shape(), (Shape{6, model.input_length()}));
  EXPECT_EQ(max_abs_difference(a, decode_prototypes(model)), 0.0);
  PmnModel<double> twin(c);
  EXPECT_EQ(max_abs_difference(a, decode_prototypes(twin)), 0.0);

  const auto csv = prototypes_csv(a, model.classes());
  EXPECT_EQ(csv.substr(0, csv.find(',', 16)), "prototype,class,b0");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(Export, JsonAndCsvFields) {
  PmnModel<double> model(tiny_config());
  Rng rng(7);
  const auto x = random_sample(model.input_length(), rng);
  auto e = explain_match<double>(model, x, 4);
  e.attribution = grad_cam<double>(model, x);
  const auto j = nlohmann::json::parse(to_json(e, 2.5));
  EXPECT_EQ(j.at("sample"), 4);
  EXPECT_EQ(j.at("matched_prototype"), e.matched_prototype);
  EXPECT_EQ(j.at("distances").size(), model.prototype_count());
  EXPECT_EQ(j.at("attribution").at("scores").size(), model.input_length());
  EXPECT_EQ(j.at("attribution").at("bin_hz"), 2.5);

  const auto csv = attribution_csv(*e.attribution, 2.5);
  EXPECT_EQ(csv.substr(0, 13), "bin,hz,score\n");
  EXPECT_NE(csv.find("\n2,5,"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + static_cast<long>(model.input_length()));
}
