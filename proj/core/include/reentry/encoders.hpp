#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "reentry/aux_encoding.hpp"
#include "reentry/config.hpp"
#include "reentry/ops.hpp"
#include "reentry/parameters.hpp"
#include "reentry/vocabulary.hpp"

namespace reentry {

struct LstmWeights {
  ad::Tensor w_x;  // in x 4h, gate order i f g o
  ad::Tensor w_h;  // h x 4h
  ad::Tensor b;    // 1 x 4h

  std::size_t hidden() const { return w_h.rows(); }

  // Uniform(-1/sqrt(h), 1/sqrt(h)) weights, forget-gate bias +1.
  static LstmWeights create(ParameterStore& store, const std::string& prefix, std::size_t in,
                            std::size_t hidden, Rng& rng);
};

struct BiLstmOutput {
  ad::Tensor states;  // n x 2h, row t = [forward_t ; backward_t]
  ad::Tensor final;   // 1 x 2h, [forward at the last step ; backward at the first step]
};

struct BiLstm {
  LstmWeights forward;
  LstmWeights backward;

  static BiLstm create(ParameterStore& store, const std::string& prefix, std::size_t in,
                       std::size_t hidden_total, Rng& rng);
  BiLstmOutput run(ad::Tape& tape, const ad::Tensor& inputs) const;
};

struct CnnWeights {
  std::vector<std::size_t> windows;
  std::vector<ad::Tensor> kernels;  // (window * d_emb) x maps
  std::vector<ad::Tensor> biases;   // 1 x maps
};

// Maps one token sequence to a fixed-width vector H^T. History messages go
// through an encoder of the same kind.
class TurnEncoder {
 public:
  TurnEncoder() = default;
  static TurnEncoder create(ParameterStore& store, const std::string& prefix, const ModelConfig& config,
                            const ad::Tensor& embedding, Rng& rng);
  // Assembled from existing tensors (tests construct encoders by hand this way).
  static TurnEncoder average(ad::Tensor embedding);
  static TurnEncoder convolutional(ad::Tensor embedding, CnnWeights cnn);
  static TurnEncoder recurrent(ad::Tensor embedding, BiLstm lstm);

  EncoderKind kind() const noexcept { return kind_; }
  std::size_t output_dim() const;

  // Returns a 1 x d_turn row. Throws EmptyPoolError on an empty sequence.
  ad::Tensor encode(ad::Tape& tape, std::span<const int> tokens) const;
  // Same, ignoring positions where `mask` is false.
  ad::Tensor encode(ad::Tape& tape, std::span<const int> tokens, const std::vector<bool>& mask) const;

 private:
  EncoderKind kind_ = EncoderKind::avg_embed;
  ad::Tensor embedding_;
  CnnWeights cnn_;
  BiLstm lstm_;
};

// Bidirectional encoder over [H^T_t ; a_t] producing H^C with one row per turn.
// With the layer disabled, H^C is the turn representations themselves,
// projected to d_ctx when the widths differ.
class StructureEncoder {
 public:
  StructureEncoder() = default;
  static StructureEncoder create(ParameterStore& store, const std::string& prefix,
                                 const ModelConfig& config, Rng& rng);
  static StructureEncoder recurrent(BiLstm lstm, bool use_aux);
  static StructureEncoder passthrough(ad::Tensor projection = {});

  ad::Tensor encode(ad::Tape& tape, const std::vector<ad::Tensor>& turn_reprs,
                    const std::vector<AuxEncoding>& aux) const;

 private:
  bool enabled_ = true;
  bool use_aux_ = true;
  BiLstm lstm_;
  ad::Tensor projection_;
};

struct HistoryRepr {
  ad::Tensor rows;  // |u| x d_turn; undefined when there are no messages
  std::vector<bool> mask;
  std::size_t dim = 0;
  bool empty() const { return !rows.defined(); }
};

HistoryRepr encode_history(ad::Tape& tape, const TurnEncoder& encoder,
                           const std::vector<std::vector<int>>& messages);

// Reads "token v1 ... vd" lines into the rows of `embedding` for known tokens.
// Returns the number of rows overwritten.
std::size_t load_pretrained_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                                       ad::Tensor& embedding);

}  // namespace reentry
