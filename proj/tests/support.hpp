// Shared fixtures for the unit, property and acceptance suites.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "reentry/batching.hpp"
#include "reentry/config.hpp"
#include "reentry/corpus.hpp"
#include "reentry/random.hpp"

namespace reentry::testing {

inline constexpr std::array<EncoderKind, 3> kEncoders = {EncoderKind::avg_embed, EncoderKind::cnn, EncoderKind::bilstm};
inline constexpr std::array<InteractionKind, 4> kMechanisms = {InteractionKind::concat, InteractionKind::attention,
                                                              InteractionKind::memnet, InteractionKind::biattention};

// d_emb = d_hidden = d; small CNN and two hops so checks stay fast.
inline ModelConfig tiny_config(EncoderKind encoder, InteractionKind interaction, std::size_t d = 8) {
  ModelConfig c = ModelConfig::toy();
  c.encoder = encoder;
  c.interaction = interaction;
  c.d_emb = d;
  c.d_hidden = d;
  c.cnn_maps = 3;
  c.hops = 2;
  return c;
}

inline std::vector<int> random_tokens(Rng& rng, std::size_t vocab_size, std::size_t max_len) {
  std::vector<int> out(static_cast<std::size_t>(rng.between(1, static_cast<int>(max_len))));
  for (int& t : out) t = rng.between(2, static_cast<int>(vocab_size) - 1);
  return out;
}

// Random id-level input with 1..max_turns turns and min_history..max_history messages.
inline ModelInput random_input(Rng& rng, std::size_t vocab_size, std::size_t max_turns, std::size_t max_tokens,
                               std::size_t min_history, std::size_t max_history) {
  ModelInput in;
  const auto turns = static_cast<std::size_t>(rng.between(1, static_cast<int>(max_turns)));
  for (std::size_t i = 0; i < turns; ++i) {
    in.context.push_back(random_tokens(rng, vocab_size, max_tokens));
    in.aux.push_back({static_cast<double>(i + 1) / static_cast<double>(turns), static_cast<double>(i) / static_cast<double>(turns),
                      rng.uniform(), rng.bernoulli(0.5) ? 1.0 : 0.0});
  }
  const auto messages =
      static_cast<std::size_t>(rng.between(static_cast<int>(min_history), static_cast<int>(max_history)));
  for (std::size_t i = 0; i < messages; ++i) in.history.push_back(random_tokens(rng, vocab_size, max_tokens));
  return in;
}

inline Turn turn(int index, int reply_to, std::string author, std::vector<std::string> tokens, std::int64_t time) {
  return Turn{index, reply_to, std::move(author), std::move(tokens), time};
}

// Three small threads: alice re-enters c1, bob re-enters c2, c3 follows both.
inline std::vector<Conversation> tiny_conversations() {
  return {
      {"c1",
       {turn(1, 0, "alice", {"hello", "movie", "night"}, 10), turn(2, 1, "bob", {"which", "movie"}, 11),
        turn(3, 2, "alice", {"the", "new", "one"}, 12)}},
      {"c2",
       {turn(1, 0, "bob", {"game", "tonight", "?"}, 20), turn(2, 1, "carol", {"sure", ":)"}, 21),
        turn(3, 2, "bob", {"great"}, 22), turn(4, 1, "alice", {"count", "me", "in"}, 23)}},
      {"c3",
       {turn(1, 0, "carol", {"movie", "or", "game", "?"}, 30), turn(2, 1, "alice", {"movie"}, 31),
        turn(3, 1, "bob", {"game"}, 32)}},
  };
}

}  // namespace reentry::testing
