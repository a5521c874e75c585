#include "reentry/batching.hpp"

#include <algorithm>
#include <stdexcept>

namespace reentry {

namespace {

std::vector<int> clip_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                             std::size_t max_tokens) {
  const std::size_t n = std::min(tokens.size(), max_tokens);
  return vocab.encode(std::span<const std::string>(tokens.data(), n));
}

template <typename T>
std::vector<std::vector<bool>> pad_block(std::vector<std::vector<T>>& rows, std::size_t width, T fill) {
  std::vector<std::vector<bool>> masks;
  masks.reserve(rows.size());
  for (auto& row : rows) {
    std::vector<bool> mask(width, false);
    std::fill_n(mask.begin(), row.size(), true);
    row.resize(width, fill);
    masks.push_back(std::move(mask));
  }
  return masks;
}

}  // namespace

ModelInput prepare_input(const Instance& instance, const Vocabulary& vocab, const BatchLimits& limits) {
  if (limits.max_turns == 0 || limits.max_tokens == 0 || limits.max_history == 0) {
    throw std::invalid_argument("batch limits must be positive");
  }
  ModelInput in;
  const auto aux = encode_aux(instance.context, instance.target_user);
  const std::size_t n_turns = instance.context.size();
  const std::size_t first_turn = n_turns > limits.max_turns ? n_turns - limits.max_turns : 0;
  for (std::size_t i = first_turn; i < n_turns; ++i) {
    in.context.push_back(clip_tokens(instance.context[i].tokens, vocab, limits.max_tokens));
    in.aux.push_back(aux[i]);
  }
  const std::size_t n_hist = instance.history.size();
  const std::size_t first_msg = n_hist > limits.max_history ? n_hist - limits.max_history : 0;
  for (std::size_t i = first_msg; i < n_hist; ++i) {
    in.history.push_back(clip_tokens(instance.history[i].tokens, vocab, limits.max_tokens));
  }
  return in;
}

Batch make_batch(const std::vector<ModelInput>& inputs, const std::vector<const Instance*>& source) {
  if (inputs.size() != source.size()) throw std::invalid_argument("make_batch: size mismatch");
  Batch b;
  std::size_t max_turns = 0, max_msgs = 0, max_tokens = 0;
  for (const auto& in : inputs) {
    max_turns = std::max(max_turns, in.context.size());
    max_msgs = std::max(max_msgs, in.history.size());
    for (const auto& t : in.context) max_tokens = std::max(max_tokens, t.size());
    for (const auto& m : in.history) max_tokens = std::max(max_tokens, m.size());
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const ModelInput& in = inputs[i];
    b.conversation_ids.push_back(source[i]->conversation_id);
    b.target_users.push_back(source[i]->target_user);
    b.labels.push_back(source[i]->label);

    auto turns = in.context;
    auto aux = in.aux;
    std::vector<bool> turn_mask(max_turns, false);
    std::fill_n(turn_mask.begin(), turns.size(), true);
    turns.resize(max_turns);
    aux.resize(max_turns, AuxEncoding{});
    b.context_token_mask.push_back(pad_block(turns, max_tokens, Vocabulary::kPad));
    b.context_tokens.push_back(std::move(turns));
    b.context_turn_mask.push_back(std::move(turn_mask));
    b.aux.push_back(std::move(aux));

    auto msgs = in.history;
    std::vector<bool> msg_mask(max_msgs, false);
    std::fill_n(msg_mask.begin(), msgs.size(), true);
    msgs.resize(max_msgs);
    b.history_token_mask.push_back(pad_block(msgs, max_tokens, Vocabulary::kPad));
    b.history_tokens.push_back(std::move(msgs));
    b.history_mask.push_back(std::move(msg_mask));
  }
  return b;
}

std::vector<Batch> make_batches(const std::vector<Instance>& instances, const Vocabulary& vocab,
                                std::size_t batch_size, const BatchLimits& limits) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  std::vector<Batch> out;
  for (std::size_t start = 0; start < instances.size(); start += batch_size) {
    const std::size_t end = std::min(instances.size(), start + batch_size);
    std::vector<ModelInput> inputs;
    std::vector<const Instance*> source;
    for (std::size_t i = start; i < end; ++i) {
      inputs.push_back(prepare_input(instances[i], vocab, limits));
      source.push_back(&instances[i]);
    }
    out.push_back(make_batch(inputs, source));
  }
  return out;
}

std::vector<ModelInput> unbatch(const Batch& b) {
  std::vector<ModelInput> out;
  out.reserve(b.size());
  auto strip = [](const std::vector<int>& tokens, const std::vector<bool>& mask) {
    std::vector<int> kept;
    for (std::size_t i = 0; i < tokens.size(); ++i)
      if (mask[i]) kept.push_back(tokens[i]);
    return kept;
  };
  for (std::size_t i = 0; i < b.size(); ++i) {
    ModelInput in;
    for (std::size_t t = 0; t < b.context_turn_mask[i].size(); ++t) {
      if (!b.context_turn_mask[i][t]) continue;
      in.context.push_back(strip(b.context_tokens[i][t], b.context_token_mask[i][t]));
      in.aux.push_back(b.aux[i][t]);
    }
    for (std::size_t m = 0; m < b.history_mask[i].size(); ++m) {
      if (!b.history_mask[i][m]) continue;
      in.history.push_back(strip(b.history_tokens[i][m], b.history_token_mask[i][m]));
    }
    out.push_back(std::move(in));
  }
  return out;
}

}  // namespace reentry
