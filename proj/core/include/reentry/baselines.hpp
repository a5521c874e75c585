#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "reentry/corpus.hpp"

namespace reentry {

struct BaselineOutput {
  std::vector<int> predictions;
  std::vector<double> scores;  // ranking scores for AUC
  std::size_t random_fallbacks = 0;
};

// Fair coin per instance: score ~ U(0,1), prediction = score > 0.5.
BaselineOutput baseline_random(std::size_t count, std::uint64_t seed);

// Always yes. Every score is 1.
BaselineOutput baseline_allyes(std::size_t count);

// Per-user record of finished conversations: for every user, (end time,
// entry count) of each conversation the user took part in.
class ParticipationIndex {
 public:
  explicit ParticipationIndex(const Corpus& corpus);

  struct Rate {
    std::size_t entered = 0;
    std::size_t reentered = 0;
  };
  // Conversations of `user` that ended before `cutoff`, excluding
  // `exclude_conversation`; re-entered means more than k entries.
  Rate rate(const std::string& user, std::int64_t cutoff, const std::string& exclude_conversation, int k) const;

 private:
  struct Participation {
    std::string conversation_id;
    std::int64_t end_time = 0;
    int entries = 0;
  };
  std::map<std::string, std::vector<Participation>> by_user_;
};

// Re-entry rate over the user's conversations that finished before the
// instance's last context turn. Predicts 1 iff rate > threshold. Users with no
// such conversation get a seeded coin flip, drawn in instance order.
BaselineOutput baseline_history(const std::vector<Instance>& instances, const ParticipationIndex& index,
                                double threshold, std::uint64_t seed);

// Sweeps 0.1, 0.2, ..., 0.9 on `dev` and returns the threshold with the best
// F1, the lowest on ties. Returns 0.5 when dev is empty.
double tune_history_threshold(const std::vector<Instance>& dev, const ParticipationIndex& index, std::uint64_t seed);

}  // namespace reentry
