#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reentry/corpus.hpp"

namespace reentry {

// Desk-scale stand-in for a real conversation corpus. Every user follows a set
// of interest topics; every conversation has one topic. After each entry a user
// posts again with probability
//   affinity * overlap(user, conversation) + (1 - affinity) * 0.5
// so re-entry is predictable from how history and context tokens align.
struct SyntheticConfig {
  int n_users = 50;
  int n_convs = 200;
  int n_topics = 5;
  double reentry_affinity = 0.8;
  std::uint64_t seed = 1;

  int topics_per_user = 1;
  int tokens_per_topic = 20;
  int general_tokens = 10;
  double general_rate = 0.2;        // share of tokens drawn from the shared pool
  double interest_leak = 0.25;      // share of topical tokens drawn from the author's interests
  double topical_participation = 0.6;
  int min_participants = 2;
  int max_participants = 4;
  int min_turn_tokens = 3;
  int max_turn_tokens = 8;
  int max_entries = 4;
};

void validate(const SyntheticConfig& config);

// Topic-pool token for (topic, slot); pools are disjoint across topics.
std::string topic_token(int topic, int slot);
std::string general_token(int slot);
std::string user_name(int user);

std::vector<Conversation> generate_synthetic(const SyntheticConfig& config);

// Interest topics of each user as drawn by generate_synthetic for `config`.
std::vector<std::vector<int>> synthetic_user_topics(const SyntheticConfig& config);

}  // namespace reentry
