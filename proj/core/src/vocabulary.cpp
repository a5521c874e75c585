#include "reentry/vocabulary.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace reentry {

Vocabulary::Vocabulary() : tokens_{"<pad>", "<unk>"} {
  ids_["<pad>"] = kPad;
  ids_["<unk>"] = kUnk;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, int min_count) {
  if (tokens.size() < 2) throw std::invalid_argument("vocabulary needs pad and unk entries");
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.ids_.clear();
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) v.ids_[v.tokens_[i]] = static_cast<int>(i);
  v.min_count_ = min_count;
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a("vocab");
  for (const auto& t : tokens_) {
    h = fnv1a(t, h);
    h = fnv1a(std::string_view("\n"), h);
  }
  return h;
}

Vocabulary build_vocabulary(const std::vector<Conversation>& train, int min_count) {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
  std::map<std::string, long> counts;
  for (const auto& c : train)
    for (const auto& t : c.turns)
      for (const auto& tok : t.tokens) ++counts[tok];
  std::vector<std::pair<std::string, long>> kept;
  for (const auto& [tok, n] : counts) {
    if (n >= min_count && tok != "<pad>" && tok != "<unk>") kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  v.min_count_ = min_count;
  for (const auto& [tok, n] : kept) {
    v.ids_[tok] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(tok);
  }
  return v;
}

}  // namespace reentry
