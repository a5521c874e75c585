#include <gtest/gtest.h>

#include <tuple>

#include "reentry/grad_check.hpp"
#include "reentry/model.hpp"
#include "reentry/training.hpp"
#include "support.hpp"

namespace reentry {
namespace {

using testing::kEncoders;
using testing::kMechanisms;
using testing::random_input;
using testing::tiny_config;

constexpr std::size_t kVocab = 20;

// Summed weighted loss of a few instances, checked against every parameter.
// Coordinates with gradients near 1e-9 sit below what eps = 1e-5 central
// differences can resolve in fp64, so these tests use the noise-aware verdict.
ad::GradCheckReport check_model(const ModelConfig& config, std::uint64_t seed, std::size_t min_history = 1) {
  Model model(config, kVocab, seed);
  Rng rng(seed + 100);
  std::vector<ModelInput> inputs;
  std::vector<int> labels;
  for (int i = 0; i < 2; ++i) {
    inputs.push_back(random_input(rng, kVocab, 3, 4, min_history, 3));
    labels.push_back(i % 2);
  }
  std::vector<ad::Tensor> params;
  for (const auto& [name, t] : model.parameters().all()) params.push_back(t);
  auto loss = [&](ad::Tape& tape) {
    ad::Tensor total;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const ad::Tensor p = model.forward(tape, inputs[i]).probability;
      const ad::Tensor l = weighted_bce(tape, p, labels[i], config.lambda, config.mu);
      total = total.defined() ? ad::add(tape, total, l) : l;
    }
    return total;
  };
  return ad::grad_check(loss, params, 1e-5, 1e-4);
}

class ModelGradient : public ::testing::TestWithParam<std::tuple<EncoderKind, InteractionKind>> {};

TEST_P(ModelGradient, MatchesCentralDifferences) {
  const auto [encoder, mechanism] = GetParam();
  const auto report = check_model(tiny_config(encoder, mechanism), 7);
  EXPECT_TRUE(report.within_noise) << "max relative error " << report.max_rel_err << " at input " << report.worst_input
                           << " offset " << report.worst_offset << " analytic " << report.worst_analytic
                           << " numeric " << report.worst_numeric << " max abs error " << report.max_abs_err
                           << " noise floor " << report.noise_floor;
  EXPECT_GT(report.coordinates, 0u);
}

INSTANTIATE_TEST_SUITE_P(AllCombinations, ModelGradient,
                         ::testing::Combine(::testing::ValuesIn(kEncoders), ::testing::ValuesIn(kMechanisms)),
                         [](const auto& info) {
                           return to_string(std::get<0>(info.param)) + "_" + to_string(std::get<1>(info.param));
                         });

TEST(ModelGradientVariants, HistoryFree) {
  EXPECT_TRUE(check_model(tiny_config(EncoderKind::bilstm, InteractionKind::none), 3).within_noise);
}

TEST(ModelGradientVariants, WithoutStructureLayer) {
  auto c = tiny_config(EncoderKind::cnn, InteractionKind::biattention);
  c.use_structure_layer = false;
  EXPECT_TRUE(check_model(c, 4).within_noise);
}

TEST(ModelGradientVariants, WithoutMetaFeatures) {
  auto c = tiny_config(EncoderKind::bilstm, InteractionKind::memnet);
  c.use_aux_meta = false;
  EXPECT_TRUE(check_model(c, 5).within_noise);
}

TEST(ModelGradientVariants, TiedEncoders) {
  auto c = tiny_config(EncoderKind::avg_embed, InteractionKind::attention);
  c.tie_encoders = true;
  EXPECT_TRUE(check_model(c, 6).within_noise);
}

TEST(ModelGradientVariants, EmptyHistoryFallbacks) {
  for (auto mechanism : kMechanisms) {
    const auto report = check_model(tiny_config(EncoderKind::bilstm, mechanism), 8, 0);
    EXPECT_TRUE(report.within_noise) << to_string(mechanism) << ": " << report.max_rel_err;
  }
}

}  // namespace
}  // namespace reentry
