#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "reentry/model.hpp"
#include "reentry/vocabulary.hpp"

namespace reentry {

inline constexpr int kCheckpointFormat = 1;

struct Checkpoint {
  Model model;
  Vocabulary vocabulary;
  nlohmann::json metadata;  // free-form, written by the caller
};

// JSON container: format, config, vocabulary tokens and hash, and every
// parameter as {shape, values}. Doubles are written in shortest round-trip
// form, so loading restores each value bit for bit.
nlohmann::json checkpoint_to_json(const Model& model, const Vocabulary& vocab, const nlohmann::json& metadata = {});
Checkpoint checkpoint_from_json(const nlohmann::json& j, std::optional<std::uint64_t> expected_vocab_hash = {});

void save_checkpoint(const std::filesystem::path& path, const Model& model, const Vocabulary& vocab,
                     const nlohmann::json& metadata = {});

// Throws LoadError on a malformed file, on parameters that do not match the
// stored config, or when the vocabulary hash differs from the expected one.
Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_vocab_hash = {});

}  // namespace reentry
