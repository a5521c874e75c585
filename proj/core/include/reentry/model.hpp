#pragma once

#include <cstdint>

#include "reentry/batching.hpp"
#include "reentry/config.hpp"
#include "reentry/encoders.hpp"
#include "reentry/interaction.hpp"
#include "reentry/parameters.hpp"

namespace reentry {

struct ForwardResult {
  ad::Tensor probability;  // 1 x 1
  AttentionTrace trace;
};

// Turn encoder -> structure encoder -> history encoder -> interaction -> sigmoid output.
class Model {
 public:
  // Parameters are drawn from `seed`.
  Model(ModelConfig config, std::size_t vocab_size, std::uint64_t seed);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  ParameterStore& parameters() noexcept { return params_; }
  const ParameterStore& parameters() const noexcept { return params_; }
  ad::Tensor embedding() const { return embedding_; }

  // History messages are encoded in lexicographic token-id order, so the
  // result does not depend on the order of input.history and neither do the
  // rows of trace.history_weights.
  ForwardResult forward(ad::Tape& tape, const ModelInput& input) const;
  // Probability without building a graph.
  double probability(const ModelInput& input) const;
  std::vector<double> probabilities(const Batch& batch) const;

  std::size_t representation_dim() const;

 private:
  ad::Tensor embedding_table(Rng& rng);

  ModelConfig config_;
  std::size_t vocab_size_;
  ParameterStore params_;
  ad::Tensor embedding_;
  TurnEncoder turn_encoder_;
  TurnEncoder history_encoder_;
  StructureEncoder structure_;
  ad::Tensor attention_projection_;
  MemNetWeights memnet_;
  BiAttentionWeights biattention_;
  ad::Tensor out_w_;
  ad::Tensor out_b_;
};

}  // namespace reentry
