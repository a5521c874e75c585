#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reentry/batching.hpp"

namespace reentry {

enum class EncoderKind { avg_embed, cnn, bilstm };

// `none` is the history-free variant: prediction from the last context state alone.
enum class InteractionKind { none, concat, attention, memnet, biattention };

std::string to_string(EncoderKind kind);
std::string to_string(InteractionKind kind);
EncoderKind parse_encoder(const std::string& name);          // avg | avg_embed | cnn | bilstm
InteractionKind parse_interaction(const std::string& name);  // none | con | att | mem | bia (or long names)

struct ModelConfig {
  EncoderKind encoder = EncoderKind::bilstm;
  InteractionKind interaction = InteractionKind::biattention;

  std::size_t d_emb = 200;
  std::size_t d_hidden = 200;  // both directions together for every BiLSTM
  std::vector<std::size_t> cnn_windows = {2, 3, 4};
  std::size_t cnn_maps = 50;
  std::size_t hops = 3;

  double lambda = 2.0;  // weight on positive instances
  double mu = 1.0;      // weight on negative instances
  double lr = 1e-3;
  std::size_t batch_size = 32;
  double threshold = 0.5;
  int max_epochs = 100;
  int patience = 10;
  double clip_norm = 5.0;  // <= 0 disables clipping
  std::uint64_t seed = 1;

  bool use_structure_layer = true;
  bool use_aux_meta = true;
  bool tie_encoders = false;

  int min_count = 1;
  BatchLimits limits;
  std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};

  // Full-size settings (d_emb 200, BiLSTM 200, CNN 3x50).
  static ModelConfig standard() { return {}; }
  // Small sizes for tests and quick experiments.
  static ModelConfig toy();

  std::size_t turn_dim() const;
  std::size_t context_dim() const { return d_hidden; }

  void validate() const;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

}  // namespace reentry
