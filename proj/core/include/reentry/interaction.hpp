#pragma once

#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "reentry/encoders.hpp"
#include "reentry/ops.hpp"

namespace reentry {

// Attention weights exported per instance. Masked slots hold exact zeros.
struct AttentionTrace {
  std::vector<double> context_weights;               // attention over turns
  std::vector<std::vector<double>> history_weights;  // per hop (memnet) or per turn (bi-attention)
  std::vector<double> beta;                          // bi-attention over turns

  nlohmann::json to_json() const;
};

struct InteractionOutput {
  ad::Tensor representation;  // r^O as a single row
  AttentionTrace trace;
};

// H^C: |c| x d_ctx with a turn mask; H^U: |u| x d_turn with a message mask
// (an undefined H^U or an all-false mask means no history).
struct InteractionInputs {
  ad::Tensor context;
  std::vector<bool> context_mask;
  ad::Tensor history;
  std::vector<bool> history_mask;
  std::size_t history_dim = 0;
};

// [H^C_last ; masked mean of H^U]; a missing history contributes zeros.
InteractionOutput interact_concat(ad::Tape& tape, const InteractionInputs& in);

// Dot attention over turns keyed by the mean history vector. `projection`
// (d_turn x d_ctx) aligns widths when they differ. No history gives uniform weights.
InteractionOutput interact_attention(ad::Tape& tape, const InteractionInputs& in,
                                     const ad::Tensor& projection = {});

struct MemNetWeights {
  ad::Tensor first_input_map;             // W^A of hop 1, d_turn x d_ctx
  std::vector<ad::Tensor> output_maps;    // W^C of hops 1..H; hop h+1 reads with W^C_h
};

InteractionOutput interact_memnet(ad::Tape& tape, const InteractionInputs& in, const MemNetWeights& w);

struct BiAttentionWeights {
  ad::Tensor score;       // 1 x 3d, applied to [H^C_i ; H^U_j ; H^C_i o H^U_j]
  ad::Tensor projection;  // d_ctx x d_turn when the widths differ
  ad::Tensor mlp_w;       // 4d x d_hidden
  ad::Tensor mlp_b;       // 1 x d_hidden
  BiLstm layer1;
  BiLstm layer2;
};

// Alignment scores for every (turn, message) pair of already width-aligned inputs.
ad::Tensor biattention_scores(ad::Tape& tape, const ad::Tensor& context, const ad::Tensor& history,
                              const ad::Tensor& score_weights);

InteractionOutput interact_biattention(ad::Tape& tape, const InteractionInputs& in,
                                       const BiAttentionWeights& w);

// History-free: the last unmasked context row.
InteractionOutput interact_context_only(ad::Tape& tape, const InteractionInputs& in);

// sigmoid(r . w + b) as a 1 x 1 tensor.
ad::Tensor predict(ad::Tape& tape, const ad::Tensor& representation, const ad::Tensor& w, const ad::Tensor& b);

}  // namespace reentry
