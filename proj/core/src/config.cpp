#include "reentry/config.hpp"

#include <stdexcept>

namespace reentry {

std::string to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::avg_embed: return "avg";
    case EncoderKind::cnn: return "cnn";
    case EncoderKind::bilstm: return "bilstm";
  }
  return "?";
}

std::string to_string(InteractionKind kind) {
  switch (kind) {
    case InteractionKind::none: return "none";
    case InteractionKind::concat: return "con";
    case InteractionKind::attention: return "att";
    case InteractionKind::memnet: return "mem";
    case InteractionKind::biattention: return "bia";
  }
  return "?";
}

EncoderKind parse_encoder(const std::string& name) {
  if (name == "avg" || name == "avg_embed") return EncoderKind::avg_embed;
  if (name == "cnn") return EncoderKind::cnn;
  if (name == "bilstm") return EncoderKind::bilstm;
  throw std::invalid_argument("unknown encoder '" + name + "' (avg|cnn|bilstm)");
}

InteractionKind parse_interaction(const std::string& name) {
  if (name == "none") return InteractionKind::none;
  if (name == "con" || name == "concat") return InteractionKind::concat;
  if (name == "att" || name == "attention") return InteractionKind::attention;
  if (name == "mem" || name == "memnet") return InteractionKind::memnet;
  if (name == "bia" || name == "biattention") return InteractionKind::biattention;
  throw std::invalid_argument("unknown interaction '" + name + "' (none|con|att|mem|bia)");
}

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.d_emb = 16;
  c.d_hidden = 16;
  c.cnn_maps = 6;
  return c;
}

std::size_t ModelConfig::turn_dim() const {
  switch (encoder) {
    case EncoderKind::avg_embed: return d_emb;
    case EncoderKind::cnn: return cnn_windows.size() * cnn_maps;
    case EncoderKind::bilstm: return d_hidden;
  }
  return 0;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& why) { throw std::invalid_argument("model config: " + why); };
  if (d_emb == 0 || d_hidden == 0) fail("dimensions must be positive");
  if (d_hidden % 2 != 0) fail("d_hidden must be even (split across two directions)");
  if (encoder == EncoderKind::cnn) {
    if (cnn_windows.empty() || cnn_maps == 0) fail("cnn needs windows and maps");
    for (auto w : cnn_windows)
      if (w == 0) fail("cnn windows must be positive");
  }
  if (hops == 0) fail("hops must be >= 1");
  if (!(lambda > 0.0) || !(mu > 0.0)) fail("lambda and mu must be positive");
  if (!(threshold > 0.0 && threshold < 1.0)) fail("threshold must lie in (0, 1)");
  if (!(lr > 0.0)) fail("learning rate must be positive");
  if (batch_size == 0) fail("batch size must be positive");
  if (max_epochs < 1) fail("max_epochs must be >= 1");
  if (patience < 0) fail("patience must be >= 0");
  if (min_count < 1) fail("min_count must be >= 1");
  if (limits.max_turns == 0 || limits.max_tokens == 0 || limits.max_history == 0)
    fail("limits must be positive");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"encoder", to_string(c.encoder)},
      {"interaction", to_string(c.interaction)},
      {"d_emb", c.d_emb},
      {"d_hidden", c.d_hidden},
      {"cnn_windows", c.cnn_windows},
      {"cnn_maps", c.cnn_maps},
      {"hops", c.hops},
      {"lambda", c.lambda},
      {"mu", c.mu},
      {"lr", c.lr},
      {"batch_size", c.batch_size},
      {"threshold", c.threshold},
      {"max_epochs", c.max_epochs},
      {"patience", c.patience},
      {"clip_norm", c.clip_norm},
      {"seed", c.seed},
      {"use_structure_layer", c.use_structure_layer},
      {"use_aux_meta", c.use_aux_meta},
      {"tie_encoders", c.tie_encoders},
      {"min_count", c.min_count},
      {"max_turns", c.limits.max_turns},
      {"max_tokens", c.limits.max_tokens},
      {"max_history", c.limits.max_history},
      {"split_ratios", c.split_ratios},
  };
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.encoder = parse_encoder(j.at("encoder").get<std::string>());
  c.interaction = parse_interaction(j.at("interaction").get<std::string>());
  c.d_emb = j.at("d_emb").get<std::size_t>();
  c.d_hidden = j.at("d_hidden").get<std::size_t>();
  c.cnn_windows = j.at("cnn_windows").get<std::vector<std::size_t>>();
  c.cnn_maps = j.at("cnn_maps").get<std::size_t>();
  c.hops = j.at("hops").get<std::size_t>();
  c.lambda = j.at("lambda").get<double>();
  c.mu = j.at("mu").get<double>();
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.threshold = j.at("threshold").get<double>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.use_structure_layer = j.at("use_structure_layer").get<bool>();
  c.use_aux_meta = j.at("use_aux_meta").get<bool>();
  c.tie_encoders = j.at("tie_encoders").get<bool>();
  c.min_count = j.at("min_count").get<int>();
  c.limits.max_turns = j.at("max_turns").get<std::size_t>();
  c.limits.max_tokens = j.at("max_tokens").get<std::size_t>();
  c.limits.max_history = j.at("max_history").get<std::size_t>();
  c.split_ratios = j.at("split_ratios").get<std::array<double, 3>>();
  c.validate();
  return c;
}

}  // namespace reentry
