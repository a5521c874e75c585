#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "reentry/aux_encoding.hpp"
#include "reentry/batching.hpp"
#include "reentry/corpus.hpp"
#include "reentry/errors.hpp"
#include "reentry/synthetic.hpp"
#include "reentry/vocabulary.hpp"
#include "support.hpp"

namespace reentry {
namespace {

using testing::turn;

Conversation by_authors(const std::string& id, const std::vector<std::string>& authors, std::int64_t t0 = 100) {
  Conversation c{id, {}};
  for (std::size_t i = 0; i < authors.size(); ++i) {
    const int index = static_cast<int>(i + 1);
    c.turns.push_back(turn(index, index - 1, authors[i], {"w" + std::to_string(i)}, t0 + static_cast<std::int64_t>(i)));
  }
  return c;
}

std::string corpus_text(const std::vector<Conversation>& convs) {
  std::ostringstream out;
  write_corpus(out, convs);
  return out.str();
}

Corpus parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_corpus(in);
}

TEST(ParseCorpus, OneConversationPoolsEveryTurn) {
  const std::string line = R"({"id":"c1","turns":[)"
                           R"j({"index":1,"reply_to":0,"author":"a","time":1,"tokens":["hi",":)"]},)j"
                           R"({"index":2,"reply_to":1,"author":"b","time":2,"tokens":["yo"]},)"
                           R"({"index":3,"reply_to":2,"author":"a","time":3,"tokens":["!"]}]})";
  const Corpus corpus = parse_text("{\"format\":1}\n" + line + "\n");
  ASSERT_EQ(corpus.conversations.size(), 1u);
  EXPECT_EQ(corpus.conversations[0].turns.size(), 3u);
  EXPECT_EQ(corpus.messages.size(), 3u);
}

TEST(ParseCorpus, EmptyInputIsEmptyCorpus) {
  const Corpus corpus = parse_text("");
  EXPECT_TRUE(corpus.conversations.empty());
  EXPECT_TRUE(corpus.messages.empty());
}

TEST(ParseCorpus, ReplyToNotBeforeIndexIsValidationError) {
  const std::string bad = R"({"id":"cx","turns":[)"
                          R"({"index":1,"reply_to":0,"author":"a","time":1,"tokens":["x"]},)"
                          R"({"index":2,"reply_to":2,"author":"b","time":2,"tokens":["y"]}]})";
  try {
    parse_text(bad);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("cx"), std::string::npos);
  }
}

TEST(ParseCorpus, MalformedLineReportsLineNumber) {
  const std::string good = corpus_text({by_authors("c1", {"a", "b"})});
  try {
    parse_text(good + "{not json\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_text(R"({"id":"c","turns":5})"), ParseError);
  EXPECT_THROW(parse_text(R"({"format":2,"id":"c","turns":[]})"), ParseError);
}

TEST(ParseCorpus, StructuralViolations) {
  auto single = by_authors("one", {"a"});
  EXPECT_THROW(validate(single), ValidationError);
  auto gap = by_authors("gap", {"a", "b"});
  gap.turns[1].index = 3;
  EXPECT_THROW(validate(gap), ValidationError);
  auto empty_tokens = by_authors("empty", {"a", "b"});
  empty_tokens.turns[1].tokens.clear();
  EXPECT_THROW(validate(empty_tokens), ValidationError);
  auto backwards = by_authors("time", {"a", "b"});
  backwards.turns[1].time = 0;
  EXPECT_THROW(validate(backwards), ValidationError);
  const std::string dup = corpus_text({by_authors("c1", {"a", "b"}), by_authors("c1", {"a", "b"})});
  EXPECT_THROW(parse_text(dup), ValidationError);
}

TEST(ParseCorpus, WriteThenParseRoundTrips) {
  const auto convs = testing::tiny_conversations();
  const Corpus corpus = parse_text(corpus_text(convs));
  ASSERT_EQ(corpus.conversations.size(), convs.size());
  for (std::size_t i = 0; i < convs.size(); ++i) {
    EXPECT_EQ(corpus.conversations[i].id, convs[i].id);
    ASSERT_EQ(corpus.conversations[i].turns.size(), convs[i].turns.size());
    for (std::size_t t = 0; t < convs[i].turns.size(); ++t) {
      EXPECT_EQ(corpus.conversations[i].turns[t].tokens, convs[i].turns[t].tokens);
      EXPECT_EQ(corpus.conversations[i].turns[t].reply_to, convs[i].turns[t].reply_to);
    }
  }
}

TEST(Vocabulary, CountCutoffAndUnk) {
  const std::vector<Conversation> train = {
      {"c", {turn(1, 0, "x", {"a", "a", "b"}, 1), turn(2, 1, "y", {"a"}, 2)}}};
  const Vocabulary v = build_vocabulary(train, 2);
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.token(0), "<pad>");
  EXPECT_EQ(v.id("a"), 2);
  EXPECT_EQ(v.id("b"), Vocabulary::kUnk);
  EXPECT_EQ(v.id("never"), Vocabulary::kUnk);
  const Vocabulary all = build_vocabulary(train, 1);
  EXPECT_EQ(all.id("a"), 2);
  EXPECT_EQ(all.id("b"), 3);
}

TEST(Vocabulary, EqualCountsOrderLexicographically) {
  const std::vector<Conversation> train = {
      {"c", {turn(1, 0, "p", {"y", "x", ":)"}, 1), turn(2, 1, "q", {"x", "y", ":)", ":)"}, 2)}}};
  const Vocabulary v = build_vocabulary(train);
  EXPECT_EQ(v.id(":)"), 2);  // count 3, punctuation kept
  EXPECT_EQ(v.id("x"), 3);
  EXPECT_EQ(v.id("y"), 4);
  EXPECT_THROW(build_vocabulary(train, 0), std::invalid_argument);
}

TEST(Vocabulary, HashTracksContent) {
  const auto convs = testing::tiny_conversations();
  EXPECT_EQ(build_vocabulary(convs).hash(), build_vocabulary(convs).hash());
  EXPECT_NE(build_vocabulary(convs).hash(), build_vocabulary({convs[0]}).hash());
  const Vocabulary v = build_vocabulary(convs);
  EXPECT_EQ(Vocabulary::from_tokens(v.tokens()).hash(), v.hash());
}

const Instance* find_instance(const std::vector<Instance>& all, const std::string& conv, const std::string& user) {
  for (const auto& i : all)
    if (i.conversation_id == conv && i.target_user == user) return &i;
  return nullptr;
}

TEST(BuildInstances, FirstEntryAndLabels) {
  const Corpus corpus = make_corpus({by_authors("c", {"A", "B", "A", "C"})});
  const auto k1 = build_instances(corpus, 1);
  ASSERT_EQ(k1.size(), 3u);
  const Instance* a = find_instance(k1, "c", "A");
  ASSERT_NE(a, nullptr);
  EXPECT_EQ(a->context.size(), 1u);
  EXPECT_EQ(a->label, 1);
  EXPECT_EQ(find_instance(k1, "c", "C")->label, 0);

  const auto k2 = build_instances(corpus, 2);
  ASSERT_EQ(k2.size(), 1u);
  EXPECT_EQ(k2[0].target_user, "A");
  EXPECT_EQ(k2[0].context.size(), 3u);
  EXPECT_EQ(k2[0].label, 0);
  EXPECT_EQ(k2[0].entry_order, 2);
  EXPECT_TRUE(build_instances(corpus, 3).empty());
  EXPECT_THROW(build_instances(corpus, 0), std::invalid_argument);
}

TEST(BuildInstances, LastSpeakerWithoutReturn) {
  const Corpus corpus = make_corpus({by_authors("c", {"A", "B"})});
  const auto instances = build_instances(corpus, 1);
  const Instance* b = find_instance(instances, "c", "B");
  ASSERT_NE(b, nullptr);
  EXPECT_EQ(b->context.size(), 2u);
  EXPECT_EQ(b->label, 0);
}

TEST(BuildInstances, IntroExampleFirstUserReturns) {
  const Corpus corpus = make_corpus({by_authors("C2", {"U1", "U2", "U1", "U3", "U2"})});
  const auto instances = build_instances(corpus, 1);
  const Instance* u1 = find_instance(instances, "C2", "U1");
  ASSERT_NE(u1, nullptr);
  EXPECT_EQ(u1->label, 1);
  EXPECT_EQ(u1->context.back().author, "U1");
  EXPECT_EQ(u1->context.size(), 1u);
}

TEST(BuildInstances, HistoryComesFromOtherConversationsBeforeCutoff) {
  const Corpus corpus = make_corpus(testing::tiny_conversations());
  const auto instances = build_instances(corpus, 1);
  // alice enters c3 at time 31: her c1 turns (10, 12) and c2 turn (23) precede it.
  const Instance* alice_c3 = find_instance(instances, "c3", "alice");
  ASSERT_NE(alice_c3, nullptr);
  ASSERT_EQ(alice_c3->history.size(), 3u);
  for (const auto& m : alice_c3->history) {
    EXPECT_NE(m.conversation_id, "c3");
    EXPECT_LT(m.time, alice_c3->context.back().time);
    EXPECT_EQ(m.author, "alice");
  }
  // alice enters c1 first, so she has no history there.
  EXPECT_TRUE(find_instance(instances, "c1", "alice")->history.empty());
}

TEST(BuildInstances, InstanceForMatchesBuildInstances) {
  const Corpus corpus = make_corpus(testing::tiny_conversations());
  for (int k = 1; k <= 2; ++k) {
    for (const auto& inst : build_instances(corpus, k)) {
      const auto one = instance_for(corpus, inst.conversation_id, inst.target_user, k);
      ASSERT_TRUE(one.has_value());
      EXPECT_EQ(one->context.size(), inst.context.size());
      EXPECT_EQ(one->history.size(), inst.history.size());
      EXPECT_EQ(one->label, inst.label);
    }
  }
  EXPECT_FALSE(instance_for(corpus, "c1", "carol", 1).has_value());
  EXPECT_FALSE(instance_for(corpus, "nope", "alice", 1).has_value());
}

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("c" + std::to_string(i));
  return out;
}

TEST(Split, EightyTenTen) {
  const Split s = split_conversations(ids(10), {0.8, 0.1, 0.1}, 42);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.dev.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
}

TEST(Split, DeterministicUnderSeed) {
  const auto a = split_conversations(ids(57), {0.8, 0.1, 0.1}, 9);
  const auto b = split_conversations(ids(57), {0.8, 0.1, 0.1}, 9);
  EXPECT_EQ(a.assignment(), b.assignment());
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), split_conversations(ids(57), {0.8, 0.1, 0.1}, 10).hash());
}

TEST(Split, SingleConversationGoesToTrain) {
  const Split s = split_conversations(ids(1), {0.8, 0.1, 0.1}, 3);
  EXPECT_EQ(s.train.size(), 1u);
  EXPECT_TRUE(s.dev.empty());
  EXPECT_TRUE(s.test.empty());
  EXPECT_THROW(split_conversations(ids(3), {0.5, 0.1, 0.1}, 0), std::invalid_argument);
}

TEST(Split, PartitionKeepsConversationsTogether) {
  SyntheticConfig sc;
  sc.n_convs = 60;
  sc.n_users = 20;
  const Corpus corpus = make_corpus(generate_synthetic(sc));
  const Split s = split_conversations(conversation_ids(corpus), {0.8, 0.1, 0.1}, 5);
  const auto parts = partition(build_instances(corpus, 1), s);
  const auto where = s.assignment();
  for (const auto& i : parts.train) EXPECT_EQ(where.at(i.conversation_id), "train");
  for (const auto& i : parts.dev) EXPECT_EQ(where.at(i.conversation_id), "dev");
  for (const auto& i : parts.test) EXPECT_EQ(where.at(i.conversation_id), "test");
}

Instance instance_with(std::vector<std::size_t> turn_lengths, std::size_t messages) {
  Instance inst;
  inst.conversation_id = "c";
  inst.target_user = "u";
  for (std::size_t i = 0; i < turn_lengths.size(); ++i) {
    Turn t;
    t.index = static_cast<int>(i + 1);
    t.reply_to = static_cast<int>(i);
    t.author = i + 1 == turn_lengths.size() ? "u" : "v";
    for (std::size_t j = 0; j < turn_lengths[i]; ++j) t.tokens.push_back("t" + std::to_string(j));
    t.time = static_cast<std::int64_t>(100 + i);
    inst.context.push_back(t);
  }
  for (std::size_t m = 0; m < messages; ++m) {
    inst.history.push_back({"u", {"m" + std::to_string(m)}, static_cast<std::int64_t>(m), "other"});
  }
  return inst;
}

Vocabulary numbered_vocab() {
  std::vector<std::string> tokens = {"<pad>", "<unk>"};
  for (int i = 0; i < 10; ++i) tokens.push_back("t" + std::to_string(i));
  for (int i = 0; i < 10; ++i) tokens.push_back("m" + std::to_string(i));
  return Vocabulary::from_tokens(tokens);
}

TEST(Batching, PadsToLongestTurnWithMask) {
  const Vocabulary v = numbered_vocab();
  const auto batches = make_batches({instance_with({2, 4}, 0)}, v, 32, {20, 8, 20});
  ASSERT_EQ(batches.size(), 1u);
  const Batch& b = batches[0];
  ASSERT_EQ(b.context_tokens[0][0].size(), 4u);
  EXPECT_EQ(b.context_token_mask[0][0], (std::vector<bool>{true, true, false, false}));
  EXPECT_EQ(b.context_tokens[0][0][2], Vocabulary::kPad);
}

TEST(Batching, KeepsMostRecentHistory) {
  const Vocabulary v = numbered_vocab();
  const ModelInput in = prepare_input(instance_with({1}, 6), v, {20, 50, 4});
  ASSERT_EQ(in.history.size(), 4u);
  EXPECT_EQ(in.history.front(), std::vector<int>{v.id("m2")});
  EXPECT_EQ(in.history.back(), std::vector<int>{v.id("m5")});
}

TEST(Batching, TruncatesTurnsAndTokens) {
  const Vocabulary v = numbered_vocab();
  const ModelInput in = prepare_input(instance_with({5, 1, 6}, 0), v, {2, 3, 20});
  ASSERT_EQ(in.context.size(), 2u);
  EXPECT_EQ(in.context[0].size(), 1u);
  EXPECT_EQ(in.context[1], (std::vector<int>{v.id("t0"), v.id("t1"), v.id("t2")}));
  ASSERT_EQ(in.aux.size(), 2u);
  EXPECT_DOUBLE_EQ(in.aux[1][0], 1.0);  // computed on the full three-turn context
  EXPECT_THROW(prepare_input(instance_with({1}, 0), v, {0, 1, 1}), std::invalid_argument);
}

TEST(Batching, BatchSizes) {
  const Vocabulary v = numbered_vocab();
  const std::vector<Instance> many(70, instance_with({2}, 1));
  const auto batches = make_batches(many, v, 32, {});
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].size(), 32u);
  EXPECT_EQ(batches[1].size(), 32u);
  EXPECT_EQ(batches[2].size(), 6u);
  EXPECT_THROW(make_batches(many, v, 0, {}), std::invalid_argument);
}

TEST(AuxEncoding, FeaturesInUnitInterval) {
  const auto convs = testing::tiny_conversations();
  const auto aux = encode_aux(convs[1].turns, "bob");
  ASSERT_EQ(aux.size(), 4u);
  // turn 3 by bob, replying to turn 2, bob is the first participant
  EXPECT_DOUBLE_EQ(aux[2][0], 3.0 / 4.0);
  EXPECT_DOUBLE_EQ(aux[2][1], 2.0 / 4.0);
  EXPECT_DOUBLE_EQ(aux[2][2], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(aux[2][3], 1.0);
  EXPECT_DOUBLE_EQ(aux[1][3], 0.0);
  EXPECT_DOUBLE_EQ(aux[3][2], 1.0);
  for (const auto& a : aux)
    for (double x : a) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
}

TEST(Synthetic, SameSeedSameBytes) {
  SyntheticConfig sc;
  sc.n_convs = 30;
  EXPECT_EQ(corpus_text(generate_synthetic(sc)), corpus_text(generate_synthetic(sc)));
  sc.seed = 2;
  const auto other = corpus_text(generate_synthetic(sc));
  sc.seed = 1;
  EXPECT_NE(corpus_text(generate_synthetic(sc)), other);
}

TEST(Synthetic, OutputPassesValidation) {
  SyntheticConfig sc;
  sc.n_convs = 100;
  for (const auto& c : generate_synthetic(sc)) EXPECT_NO_THROW(validate(c));
}

TEST(Synthetic, RejectsBadConfig) {
  SyntheticConfig sc;
  sc.reentry_affinity = 1.5;
  EXPECT_THROW(validate(sc), std::invalid_argument);
  sc = {};
  sc.n_users = 0;
  EXPECT_THROW(generate_synthetic(sc), std::invalid_argument);
}

int topic_of(const Conversation& c) { return std::stoi(c.turns[0].tokens[0].substr(1)); }

// Pure topical tokens make a conversation's topic readable from any token.
SyntheticConfig pure_topics(double affinity) {
  SyntheticConfig sc;
  sc.n_users = 40;
  sc.n_convs = 600;
  sc.n_topics = 4;
  sc.reentry_affinity = affinity;
  sc.general_rate = 0.0;
  sc.interest_leak = 0.0;
  sc.seed = 17;
  return sc;
}

TEST(Synthetic, FullAffinityDeterminesLabels) {
  const auto sc = pure_topics(1.0);
  const auto topics = synthetic_user_topics(sc);
  const Corpus corpus = make_corpus(generate_synthetic(sc));
  std::map<std::string, int> conv_topic;
  for (const auto& c : corpus.conversations) conv_topic[c.id] = topic_of(c);
  for (const auto& inst : build_instances(corpus, 1)) {
    const int user = std::stoi(inst.target_user.substr(1));
    const bool fan = topics[static_cast<std::size_t>(user)][0] == conv_topic[inst.conversation_id];
    EXPECT_EQ(inst.label, fan ? 1 : 0) << inst.conversation_id << " " << inst.target_user;
  }
}

TEST(Synthetic, ZeroAffinityIsACoinFlip) {
  const auto sc = pure_topics(0.0);
  const auto topics = synthetic_user_topics(sc);
  const Corpus corpus = make_corpus(generate_synthetic(sc));
  std::map<std::string, int> conv_topic;
  for (const auto& c : corpus.conversations) conv_topic[c.id] = topic_of(c);
  std::array<double, 2> pos{}, count{};
  for (const auto& inst : build_instances(corpus, 1)) {
    const int user = std::stoi(inst.target_user.substr(1));
    const int fan = topics[static_cast<std::size_t>(user)][0] == conv_topic[inst.conversation_id] ? 1 : 0;
    pos[fan] += inst.label;
    count[fan] += 1;
  }
  for (int fan = 0; fan < 2; ++fan) {
    ASSERT_GT(count[fan], 200);
    EXPECT_NEAR(pos[fan] / count[fan], 0.5, 0.06) << "fan=" << fan;
  }
}

}  // namespace
}  // namespace reentry
