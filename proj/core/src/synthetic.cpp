#include "reentry/synthetic.hpp"

#include <algorithm>
#include <stdexcept>

#include "reentry/random.hpp"

namespace reentry {

void validate(const SyntheticConfig& c) {
  if (c.n_users <= 0 || c.n_convs <= 0 || c.n_topics <= 0) {
    throw std::invalid_argument("synthetic corpus counts must be positive");
  }
  if (!(c.reentry_affinity >= 0.0 && c.reentry_affinity <= 1.0)) {
    throw std::invalid_argument("reentry_affinity must lie in [0, 1]");
  }
  if (c.topics_per_user < 1 || c.topics_per_user > c.n_topics) {
    throw std::invalid_argument("topics_per_user must lie in [1, n_topics]");
  }
  if (c.tokens_per_topic < 1 || c.general_tokens < 1 || c.max_entries < 1) {
    throw std::invalid_argument("token pools and max_entries must be positive");
  }
  if (c.min_participants < 2 || c.max_participants < c.min_participants) {
    throw std::invalid_argument("participants range must satisfy 2 <= min <= max");
  }
  if (c.max_participants > c.n_users) {
    throw std::invalid_argument("max_participants exceeds n_users");
  }
  if (c.min_turn_tokens < 1 || c.max_turn_tokens < c.min_turn_tokens) {
    throw std::invalid_argument("turn token range must satisfy 1 <= min <= max");
  }
}

std::string topic_token(int topic, int slot) {
  return "t" + std::to_string(topic) + "w" + std::to_string(slot);
}

std::string general_token(int slot) { return "g" + std::to_string(slot); }

std::string user_name(int user) { return "u" + std::to_string(user); }

namespace {

std::vector<std::vector<int>> draw_user_topics(const SyntheticConfig& c, Rng& rng) {
  std::vector<std::vector<int>> topics(static_cast<std::size_t>(c.n_users));
  std::vector<int> all(static_cast<std::size_t>(c.n_topics));
  for (int t = 0; t < c.n_topics; ++t) all[static_cast<std::size_t>(t)] = t;
  for (auto& mine : topics) {
    std::vector<int> order = all;
    rng.shuffle(order);
    mine.assign(order.begin(), order.begin() + c.topics_per_user);
    std::sort(mine.begin(), mine.end());
  }
  return topics;
}

double overlap(const std::vector<int>& user_topics, int topic) {
  const bool hit = std::find(user_topics.begin(), user_topics.end(), topic) != user_topics.end();
  return hit ? 1.0 / static_cast<double>(user_topics.size()) : 0.0;
}

}  // namespace

std::vector<std::vector<int>> synthetic_user_topics(const SyntheticConfig& config) {
  validate(config);
  Rng rng(config.seed);
  return draw_user_topics(config, rng);
}

std::vector<Conversation> generate_synthetic(const SyntheticConfig& c) {
  validate(c);
  Rng rng(c.seed);
  const auto user_topics = draw_user_topics(c, rng);

  std::vector<std::vector<int>> fans(static_cast<std::size_t>(c.n_topics));
  for (int u = 0; u < c.n_users; ++u)
    for (int t : user_topics[static_cast<std::size_t>(u)]) fans[static_cast<std::size_t>(t)].push_back(u);

  std::int64_t clock = 1'000'000;
  std::vector<Conversation> out;
  out.reserve(static_cast<std::size_t>(c.n_convs));
  for (int ci = 0; ci < c.n_convs; ++ci) {
    const int topic = static_cast<int>(rng.below(static_cast<std::uint64_t>(c.n_topics)));
    const auto& topic_fans = fans[static_cast<std::size_t>(topic)];

    const int n_part = rng.between(c.min_participants, c.max_participants);
    std::vector<int> participants;
    while (static_cast<int>(participants.size()) < n_part) {
      int u;
      if (!topic_fans.empty() && rng.bernoulli(c.topical_participation)) {
        u = topic_fans[static_cast<std::size_t>(rng.below(topic_fans.size()))];
      } else {
        u = static_cast<int>(rng.below(static_cast<std::uint64_t>(c.n_users)));
      }
      if (std::find(participants.begin(), participants.end(), u) == participants.end()) {
        participants.push_back(u);
      }
    }

    // Entry slots: one per entry, shuffled; a user's first slot is their first entry.
    std::vector<int> slots;
    for (int u : participants) {
      const double p = c.reentry_affinity * overlap(user_topics[static_cast<std::size_t>(u)], topic) +
                       (1.0 - c.reentry_affinity) * 0.5;
      int entries = 1;
      while (entries < c.max_entries && rng.bernoulli(p)) ++entries;
      for (int e = 0; e < entries; ++e) slots.push_back(u);
    }
    rng.shuffle(slots);

    Conversation conv;
    conv.id = "c" + std::to_string(ci);
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const int author = slots[i];
      const auto& interests = user_topics[static_cast<std::size_t>(author)];
      Turn turn;
      turn.index = static_cast<int>(i + 1);
      turn.reply_to = i == 0 ? 0 : (rng.bernoulli(0.7) ? static_cast<int>(i) : rng.between(1, static_cast<int>(i)));
      turn.author = user_name(author);
      turn.time = ++clock;
      const int n_tokens = rng.between(c.min_turn_tokens, c.max_turn_tokens);
      for (int k = 0; k < n_tokens; ++k) {
        if (rng.bernoulli(c.general_rate)) {
          turn.tokens.push_back(general_token(rng.between(0, c.general_tokens - 1)));
          continue;
        }
        int source = topic;
        if (rng.bernoulli(c.interest_leak)) {
          source = interests[static_cast<std::size_t>(rng.below(interests.size()))];
        }
        turn.tokens.push_back(topic_token(source, rng.between(0, c.tokens_per_topic - 1)));
      }
      conv.turns.push_back(std::move(turn));
    }
    out.push_back(std::move(conv));
  }
  return out;
}

}  // namespace reentry
