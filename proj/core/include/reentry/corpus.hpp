#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace reentry {

inline constexpr int kCorpusFormat = 1;

struct Turn {
  int index = 0;     // 1-based position in the conversation
  int reply_to = 0;  // 0 for the thread root
  std::string author;
  std::vector<std::string> tokens;
  std::int64_t time = 0;
};

struct Conversation {
  std::string id;
  std::vector<Turn> turns;
};

struct Message {
  std::string author;
  std::vector<std::string> tokens;
  std::int64_t time = 0;
  std::string conversation_id;
};

struct Corpus {
  std::vector<Conversation> conversations;
  // Every turn of every conversation, ordered by (author, time).
  std::vector<Message> messages;

  // Messages by `author` before `cutoff`, excluding `exclude_conversation`, oldest first.
  std::vector<Message> history_of(const std::string& author, std::int64_t cutoff,
                                  const std::string& exclude_conversation) const;
};

struct Instance {
  std::string conversation_id;
  std::string target_user;
  int entry_order = 1;  // k
  std::vector<Turn> context;
  std::vector<Message> history;
  int label = 0;
};

// Throws ValidationError naming the conversation on any structural violation.
void validate(const Conversation& conversation);

// Fills the message pool from the conversations.
Corpus make_corpus(std::vector<Conversation> conversations);

// One conversation object as it appears on a corpus line. `line` only labels
// ParseError messages. Does not validate.
Conversation conversation_from_json(const nlohmann::json& obj, std::size_t line = 0);

Corpus parse_corpus(std::istream& in);
Corpus parse_corpus(const std::filesystem::path& path);

void write_corpus(std::ostream& out, const std::vector<Conversation>& conversations);

// One instance per (conversation, user) where the user has at least k entries.
std::vector<Instance> build_instances(const Corpus& corpus, int k);

// The instance of `user` at entry order k in one conversation, or nothing when
// the conversation is unknown or the user has fewer than k entries.
std::optional<Instance> instance_for(const Corpus& corpus, const std::string& conversation_id,
                                     const std::string& user, int k);

// Conversation ids in corpus order.
std::vector<std::string> conversation_ids(const Corpus& corpus);

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> dev;
  std::vector<std::string> test;

  // "train" | "dev" | "test" for every assigned conversation.
  std::map<std::string, std::string> assignment() const;
  std::uint64_t hash() const;
};

// Shuffles conversation ids under `seed` and cuts them by largest remainder,
// train taking leftover units first, then dev, then test.
Split split_conversations(const std::vector<std::string>& ids,
                          std::array<double, 3> ratios = {0.8, 0.1, 0.1},
                          std::uint64_t seed = 0);

struct InstanceSplit {
  std::vector<Instance> train;
  std::vector<Instance> dev;
  std::vector<Instance> test;
};

InstanceSplit partition(const std::vector<Instance>& instances, const Split& split);

// Instances / split dumps, one JSON object per line.
void write_instances(std::ostream& out, const std::vector<Instance>& instances,
                     const std::map<std::string, std::string>& split_of = {});

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 14695981039346656037ULL);
std::uint64_t file_hash(const std::filesystem::path& path);
std::string hex64(std::uint64_t value);

}  // namespace reentry
