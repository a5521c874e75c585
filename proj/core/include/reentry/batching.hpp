#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "reentry/aux_encoding.hpp"
#include "reentry/corpus.hpp"
#include "reentry/vocabulary.hpp"

namespace reentry {

struct BatchLimits {
  std::size_t max_turns = 20;
  std::size_t max_tokens = 50;
  std::size_t max_history = 20;
};

// Unpadded, id-encoded model input for one instance.
struct ModelInput {
  std::vector<std::vector<int>> context;  // one token-id list per turn, oldest first
  std::vector<AuxEncoding> aux;           // parallel to context
  std::vector<std::vector<int>> history;  // one token-id list per message, oldest first
};

// Applies the limits: keeps the most recent turns and messages and the first
// max_tokens tokens of each. Aux features are computed on the full context.
ModelInput prepare_input(const Instance& instance, const Vocabulary& vocab, const BatchLimits& limits);

// Padded block of instances. Axes: [instance][turn or message][token].
struct Batch {
  std::vector<std::string> conversation_ids;
  std::vector<std::string> target_users;
  std::vector<int> labels;

  std::vector<std::vector<std::vector<int>>> context_tokens;
  std::vector<std::vector<std::vector<bool>>> context_token_mask;
  std::vector<std::vector<bool>> context_turn_mask;
  std::vector<std::vector<AuxEncoding>> aux;

  std::vector<std::vector<std::vector<int>>> history_tokens;
  std::vector<std::vector<std::vector<bool>>> history_token_mask;
  std::vector<std::vector<bool>> history_mask;

  std::size_t size() const noexcept { return labels.size(); }
};

Batch make_batch(const std::vector<ModelInput>& inputs, const std::vector<const Instance*>& source);

// Consecutive blocks of `batch_size` instances in the given order.
std::vector<Batch> make_batches(const std::vector<Instance>& instances, const Vocabulary& vocab,
                                std::size_t batch_size, const BatchLimits& limits);

// Drops padding using the masks.
std::vector<ModelInput> unbatch(const Batch& batch);

}  // namespace reentry
