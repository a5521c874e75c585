#include "reentry/model.hpp"

#include <algorithm>
#include <cmath>

namespace reentry {

using ad::Tape;
using ad::Tensor;

namespace {

double fan_in_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace

Model::Model(ModelConfig config, std::size_t vocab_size, std::uint64_t seed)
    : config_(std::move(config)), vocab_size_(vocab_size) {
  config_.validate();
  if (vocab_size_ < 2) throw std::invalid_argument("vocabulary must hold at least pad and unk");
  Rng rng(seed);
  embedding_ = embedding_table(rng);

  const std::size_t d_turn = config_.turn_dim();
  const std::size_t d_ctx = config_.context_dim();
  const bool uses_history = config_.interaction != InteractionKind::none;

  turn_encoder_ = TurnEncoder::create(params_, "turn", config_, embedding_, rng);
  if (uses_history) {
    history_encoder_ = config_.tie_encoders ? turn_encoder_
                                            : TurnEncoder::create(params_, "history", config_, embedding_, rng);
  }
  structure_ = StructureEncoder::create(params_, "structure", config_, rng);

  switch (config_.interaction) {
    case InteractionKind::none:
    case InteractionKind::concat:
      break;
    case InteractionKind::attention:
      if (d_turn != d_ctx) {
        attention_projection_ = params_.uniform("interaction.att.projection", {d_turn, d_ctx}, fan_in_bound(d_turn), rng);
      }
      break;
    case InteractionKind::memnet:
      memnet_.first_input_map = params_.uniform("interaction.mem.A1", {d_turn, d_ctx}, fan_in_bound(d_turn), rng);
      for (std::size_t h = 1; h <= config_.hops; ++h) {
        memnet_.output_maps.push_back(
            params_.uniform("interaction.mem.C" + std::to_string(h), {d_turn, d_ctx}, fan_in_bound(d_turn), rng));
      }
      break;
    case InteractionKind::biattention: {
      if (d_ctx != d_turn) {
        biattention_.projection = params_.uniform("interaction.bia.projection", {d_ctx, d_turn}, fan_in_bound(d_ctx), rng);
      }
      const std::size_t d = d_turn;
      biattention_.score = params_.uniform("interaction.bia.score", {1, 3 * d}, fan_in_bound(3 * d), rng);
      biattention_.mlp_w = params_.uniform("interaction.bia.mlp.w", {4 * d, config_.d_hidden}, fan_in_bound(4 * d), rng);
      biattention_.mlp_b = params_.uniform("interaction.bia.mlp.b", {1, config_.d_hidden}, fan_in_bound(4 * d), rng);
      biattention_.layer1 = BiLstm::create(params_, "interaction.bia.layer1", config_.d_hidden, config_.d_hidden, rng);
      biattention_.layer2 = BiLstm::create(params_, "interaction.bia.layer2", config_.d_hidden, config_.d_hidden, rng);
      break;
    }
  }

  const std::size_t d_out = representation_dim();
  out_w_ = params_.uniform("output.w", {d_out, 1}, fan_in_bound(d_out), rng);
  out_b_ = params_.zeros("output.b", {1, 1});
}

Tensor Model::embedding_table(Rng& rng) {
  Tensor table = params_.uniform("embedding", {vocab_size_, config_.d_emb}, 0.1, rng);
  auto v = table.mutable_values();
  std::fill_n(v.begin(), config_.d_emb, 0.0);  // pad row
  return table;
}

std::size_t Model::representation_dim() const {
  switch (config_.interaction) {
    case InteractionKind::none:
    case InteractionKind::attention:
    case InteractionKind::memnet:
      return config_.context_dim();
    case InteractionKind::concat:
      return config_.context_dim() + config_.turn_dim();
    case InteractionKind::biattention:
      return config_.d_hidden;
  }
  return 0;
}

ForwardResult Model::forward(Tape& tape, const ModelInput& input) const {
  std::vector<Tensor> turns;
  turns.reserve(input.context.size());
  for (const auto& tokens : input.context) turns.push_back(turn_encoder_.encode(tape, tokens));
  const Tensor context = structure_.encode(tape, turns, input.aux);

  InteractionOutput mixed;
  if (config_.interaction == InteractionKind::none) {
    InteractionInputs in{context, std::vector<bool>(context.rows(), true), {}, {}, 0};
    mixed = interact_context_only(tape, in);
  } else {
    // History is a set: a canonical order makes every reduction over it order-free.
    auto messages = input.history;
    std::sort(messages.begin(), messages.end());
    const HistoryRepr history = encode_history(tape, history_encoder_, messages);
    InteractionInputs in{context, std::vector<bool>(context.rows(), true), history.rows, history.mask, history.dim};
    switch (config_.interaction) {
      case InteractionKind::concat: mixed = interact_concat(tape, in); break;
      case InteractionKind::attention: mixed = interact_attention(tape, in, attention_projection_); break;
      case InteractionKind::memnet: mixed = interact_memnet(tape, in, memnet_); break;
      case InteractionKind::biattention: mixed = interact_biattention(tape, in, biattention_); break;
      case InteractionKind::none: break;
    }
  }
  return {predict(tape, mixed.representation, out_w_, out_b_), std::move(mixed.trace)};
}

double Model::probability(const ModelInput& input) const {
  Tape tape(false);
  return forward(tape, input).probability.item();
}

std::vector<double> Model::probabilities(const Batch& batch) const {
  std::vector<double> out;
  for (const auto& input : unbatch(batch)) out.push_back(probability(input));
  return out;
}

}  // namespace reentry
