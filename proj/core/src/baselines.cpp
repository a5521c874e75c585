#include "reentry/baselines.hpp"

#include <stdexcept>

#include "reentry/metrics.hpp"
#include "reentry/random.hpp"

namespace reentry {

BaselineOutput baseline_random(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  BaselineOutput out;
  out.random_fallbacks = count;
  for (std::size_t i = 0; i < count; ++i) {
    const double s = rng.uniform();
    out.scores.push_back(s);
    out.predictions.push_back(s > 0.5 ? 1 : 0);
  }
  return out;
}

BaselineOutput baseline_allyes(std::size_t count) {
  return {std::vector<int>(count, 1), std::vector<double>(count, 1.0), 0};
}

ParticipationIndex::ParticipationIndex(const Corpus& corpus) {
  for (const auto& conv : corpus.conversations) {
    std::map<std::string, int> entries;
    for (const auto& turn : conv.turns) ++entries[turn.author];
    const std::int64_t end = conv.turns.empty() ? 0 : conv.turns.back().time;
    for (const auto& [user, n] : entries) by_user_[user].push_back({conv.id, end, n});
  }
}

ParticipationIndex::Rate ParticipationIndex::rate(const std::string& user, std::int64_t cutoff,
                                                  const std::string& exclude_conversation, int k) const {
  Rate r;
  auto it = by_user_.find(user);
  if (it == by_user_.end()) return r;
  for (const auto& p : it->second) {
    if (p.conversation_id == exclude_conversation || p.end_time >= cutoff) continue;
    ++r.entered;
    if (p.entries > k) ++r.reentered;
  }
  return r;
}

BaselineOutput baseline_history(const std::vector<Instance>& instances, const ParticipationIndex& index,
                                double threshold, std::uint64_t seed) {
  if (threshold < 0.0 || threshold > 1.0) throw std::invalid_argument("history baseline threshold must lie in [0,1]");
  Rng rng(seed);
  BaselineOutput out;
  for (const auto& inst : instances) {
    const std::int64_t cutoff = inst.context.empty() ? 0 : inst.context.back().time;
    const auto r = index.rate(inst.target_user, cutoff, inst.conversation_id, inst.entry_order);
    if (r.entered == 0) {
      const double s = rng.uniform();
      out.scores.push_back(s);
      out.predictions.push_back(s > 0.5 ? 1 : 0);
      ++out.random_fallbacks;
    } else {
      const double rate = static_cast<double>(r.reentered) / static_cast<double>(r.entered);
      out.scores.push_back(rate);
      out.predictions.push_back(rate > threshold ? 1 : 0);
    }
  }
  return out;
}

double tune_history_threshold(const std::vector<Instance>& dev, const ParticipationIndex& index, std::uint64_t seed) {
  if (dev.empty()) return 0.5;
  std::vector<int> labels;
  for (const auto& inst : dev) labels.push_back(inst.label);
  double best_threshold = 0.1;
  double best_f1 = -1.0;
  for (int step = 1; step <= 9; ++step) {
    const double t = step / 10.0;
    const auto out = baseline_history(dev, index, t, seed);
    const double f1 = prf1(out.predictions, labels).f1;
    if (f1 > best_f1) {
      best_f1 = f1;
      best_threshold = t;
    }
  }
  return best_threshold;
}

}  // namespace reentry
