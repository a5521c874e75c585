#include "reentry/checkpoint.hpp"

#include <fstream>

#include "reentry/corpus.hpp"
#include "reentry/errors.hpp"

namespace reentry {

nlohmann::json checkpoint_to_json(const Model& model, const Vocabulary& vocab, const nlohmann::json& metadata) {
  if (model.vocab_size() != vocab.size()) throw std::invalid_argument("checkpoint: model and vocabulary sizes differ");
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : model.parameters().all()) {
    params[name] = {{"shape", t.shape()}, {"values", std::vector<double>(t.values().begin(), t.values().end())}};
  }
  return {{"format", kCheckpointFormat},
          {"config", to_json(model.config())},
          {"vocabulary", {{"hash", hex64(vocab.hash())}, {"min_count", vocab.min_count()}, {"tokens", vocab.tokens()}}},
          {"parameters", params},
          {"metadata", metadata.is_null() ? nlohmann::json::object() : metadata}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j, std::optional<std::uint64_t> expected_vocab_hash) {
  try {
    if (j.at("format").get<int>() != kCheckpointFormat) {
      throw LoadError("unsupported checkpoint format " + j.at("format").dump());
    }
    const auto& vj = j.at("vocabulary");
    Vocabulary vocab = Vocabulary::from_tokens(vj.at("tokens").get<std::vector<std::string>>(), vj.at("min_count").get<int>());
    const std::string stored_hash = vj.at("hash").get<std::string>();
    if (hex64(vocab.hash()) != stored_hash) throw LoadError("checkpoint vocabulary does not match its stored hash");
    if (expected_vocab_hash && *expected_vocab_hash != vocab.hash()) {
      throw LoadError("vocabulary hash mismatch: checkpoint has " + stored_hash + ", expected " +
                      hex64(*expected_vocab_hash));
    }
    ModelConfig config = config_from_json(j.at("config"));
    Model model(config, vocab.size(), config.seed);
    const auto& pj = j.at("parameters");
    if (pj.size() != model.parameters().all().size()) throw LoadError("checkpoint parameter count differs from config");
    for (const auto& [name, const_t] : model.parameters().all()) {
      if (!pj.contains(name)) throw LoadError("checkpoint lacks parameter '" + name + "'");
      const auto& entry = pj.at(name);
      if (entry.at("shape").get<ad::Shape>() != const_t.shape()) throw LoadError("parameter '" + name + "' has the wrong shape");
      const auto values = entry.at("values").get<std::vector<double>>();
      ad::Tensor t = const_t;
      auto dst = t.mutable_values();
      if (values.size() != dst.size()) throw LoadError("parameter '" + name + "' has the wrong value count");
      std::copy(values.begin(), values.end(), dst.begin());
    }
    return {std::move(model), std::move(vocab), j.value("metadata", nlohmann::json::object())};
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const Vocabulary& vocab,
                     const nlohmann::json& metadata) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(model, vocab, metadata).dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_vocab_hash) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j, expected_vocab_hash);
}

}  // namespace reentry
