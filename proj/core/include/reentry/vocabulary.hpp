#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "reentry/corpus.hpp"

namespace reentry {

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();
  // Rebuilds from an explicit id-ordered token list (pad and unk included).
  static Vocabulary from_tokens(std::vector<std::string> tokens, int min_count = 1);

  int id(const std::string& token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::vector<int> encode(std::span<const std::string> tokens) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  int min_count() const noexcept { return min_count_; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::uint64_t hash() const;

 private:
  friend Vocabulary build_vocabulary(const std::vector<Conversation>&, int);
  std::unordered_map<std::string, int> ids_;
  std::vector<std::string> tokens_;
  int min_count_ = 1;
};

// Tokens with count >= min_count in `train` get ids from 2 upward, by
// descending count then lexicographically.
Vocabulary build_vocabulary(const std::vector<Conversation>& train, int min_count = 1);

}  // namespace reentry
