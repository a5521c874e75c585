// Randomised invariants. Every generator is seeded so failures replay exactly.
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "reentry/batching.hpp"
#include "reentry/grad_check.hpp"
#include "reentry/metrics.hpp"
#include "reentry/model.hpp"
#include "reentry/ops.hpp"
#include "reentry/synthetic.hpp"
#include "reentry/vocabulary.hpp"
#include "support.hpp"

namespace reentry {
namespace {

using namespace ad;

Tensor random_tensor(Rng& rng, Shape shape) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Mask random_mask(Rng& rng, std::size_t n) {
  Mask m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = rng.bernoulli(0.7);
  m[rng.below(n)] = true;
  return m;
}

// A chain of 2..6 shape-preserving ops over x (3x4) and w (4x4), reduced by sum.
struct RandomGraph {
  std::vector<int> ops;
  std::vector<Mask> masks;
  std::vector<double> factors;

  explicit RandomGraph(Rng& rng) {
    const int n = rng.between(2, 6);
    for (int i = 0; i < n; ++i) {
      ops.push_back(rng.between(0, 6));
      masks.push_back(random_mask(rng, 4));
      factors.push_back(rng.uniform(-2.0, 2.0));
    }
  }

  Tensor operator()(Tape& tape, const Tensor& x, const Tensor& w) const {
    Tensor cur = x;
    for (std::size_t i = 0; i < ops.size(); ++i) {
      switch (ops[i]) {
        case 0: cur = tanh(tape, cur); break;
        case 1: cur = sigmoid(tape, cur); break;
        case 2: cur = scale(tape, cur, factors[i]); break;
        case 3: cur = add(tape, cur, x); break;
        case 4: cur = hadamard(tape, cur, x); break;
        case 5: cur = matmul(tape, cur, w); break;
        default: cur = masked_softmax(tape, cur, masks[i]); break;
      }
    }
    return sum(tape, cur);
  }
};

TEST(Property, RandomGraphsPassGradCheck) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    Rng rng(seed);
    const RandomGraph graph(rng);
    const Tensor x = random_tensor(rng, {3, 4});
    const Tensor w = random_tensor(rng, {4, 4});
    const auto report = grad_check([&](Tape& t) { return graph(t, x, w); }, {x, w}, 1e-5, 1e-4);
    EXPECT_TRUE(report.within_noise) << "seed " << seed << " max_rel_err " << report.max_rel_err;
  }
}

double brute_force_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[i] != 1 || labels[j] != 0) continue;
      ++pairs;
      wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
    }
  return wins / static_cast<double>(pairs);
}

TEST(Property, AucMatchesPairCounting) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto n = static_cast<std::size_t>(rng.between(2, 200));
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    // Coarse scores so ties are common.
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = std::round(rng.uniform() * 10.0) / 10.0;
      labels[i] = rng.bernoulli(0.3) ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    EXPECT_NEAR(auc(scores, labels), brute_force_auc(scores, labels), 1e-12) << "seed " << seed;
  }
}

TEST(Property, Prf1Arithmetic) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto n = static_cast<std::size_t>(rng.between(1, 50));
    std::vector<int> preds(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = rng.bernoulli(0.5);
      labels[i] = rng.bernoulli(0.4);
    }
    const Metrics m = prf1(preds, labels);
    ASSERT_EQ(m.tp + m.fp + m.tn + m.fn, n);
    EXPECT_GE(m.f1, 0.0);
    EXPECT_LE(m.f1, 1.0);
    if (m.tp > 0) {
      EXPECT_DOUBLE_EQ(m.precision, static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp));
      EXPECT_DOUBLE_EQ(m.recall, static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn));
      EXPECT_NEAR(m.f1, 2 * m.precision * m.recall / (m.precision + m.recall), 1e-15);
    } else {
      EXPECT_EQ(m.f1, 0.0);
    }
    EXPECT_EQ(prf1(labels, labels).f1, m.tp + m.fn > 0 ? 1.0 : 0.0) << "seed " << seed;
  }
}

Corpus random_corpus(std::uint64_t seed) {
  Rng rng(seed);
  SyntheticConfig sc;
  sc.n_users = rng.between(4, 30);
  sc.n_convs = rng.between(5, 60);
  sc.n_topics = rng.between(1, 5);
  sc.reentry_affinity = rng.uniform();
  sc.seed = seed;
  return make_corpus(generate_synthetic(sc));
}

TEST(Property, InstanceInvariants) {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const Corpus corpus = random_corpus(seed);
    std::map<std::string, const Conversation*> by_id;
    for (const auto& c : corpus.conversations) by_id[c.id] = &c;
    for (int k = 1; k <= 3; ++k) {
      for (const Instance& inst : build_instances(corpus, k)) {
        const Conversation& conv = *by_id.at(inst.conversation_id);
        ASSERT_FALSE(inst.context.empty());
        EXPECT_EQ(inst.entry_order, k);
        EXPECT_EQ(inst.context.back().author, inst.target_user);
        const auto entries_in_context = std::count_if(inst.context.begin(), inst.context.end(),
                                                      [&](const Turn& t) { return t.author == inst.target_user; });
        EXPECT_EQ(entries_in_context, k);
        const auto entries_total = std::count_if(conv.turns.begin(), conv.turns.end(),
                                                 [&](const Turn& t) { return t.author == inst.target_user; });
        EXPECT_EQ(inst.label, entries_total > k ? 1 : 0);
        for (std::size_t i = 0; i < inst.context.size(); ++i) EXPECT_EQ(inst.context[i].index, conv.turns[i].index);
        for (const Message& m : inst.history) {
          EXPECT_EQ(m.author, inst.target_user);
          EXPECT_NE(m.conversation_id, inst.conversation_id);
          EXPECT_LT(m.time, inst.context.back().time);
        }
      }
    }
  }
}

TEST(Property, VocabularyNeverSeesHeldOutTokens) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Corpus corpus = random_corpus(seed);
    const Split split = split_conversations(conversation_ids(corpus), {0.8, 0.1, 0.1}, seed);
    const std::set<std::string> train_ids(split.train.begin(), split.train.end());
    std::vector<Conversation> train;
    std::set<std::string> train_tokens;
    for (const auto& c : corpus.conversations) {
      if (!train_ids.count(c.id)) continue;
      train.push_back(c);
      for (const auto& t : c.turns) train_tokens.insert(t.tokens.begin(), t.tokens.end());
    }
    const Vocabulary vocab = build_vocabulary(train);
    for (std::size_t id = 2; id < vocab.size(); ++id)
      EXPECT_TRUE(train_tokens.count(vocab.token(static_cast<int>(id)))) << vocab.token(static_cast<int>(id));
  }
}

TEST(Property, BatchRoundTrip) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto n = static_cast<std::size_t>(rng.between(1, 8));
    std::vector<ModelInput> inputs;
    std::vector<Instance> owners(n);
    std::vector<const Instance*> source;
    for (std::size_t i = 0; i < n; ++i) {
      inputs.push_back(testing::random_input(rng, 30, 5, 6, 0, 4));
      owners[i].label = static_cast<int>(i % 2);
      source.push_back(&owners[i]);
    }
    const auto back = unbatch(make_batch(inputs, source));
    ASSERT_EQ(back.size(), n);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(back[i].context, inputs[i].context);
      EXPECT_EQ(back[i].aux, inputs[i].aux);
      EXPECT_EQ(back[i].history, inputs[i].history);
    }
  }
}

void expect_distribution(const std::vector<double>& w, const char* what, std::uint64_t seed) {
  if (w.empty()) return;
  double total = 0.0;
  for (double x : w) {
    EXPECT_GE(x, 0.0);
    total += x;
  }
  EXPECT_NEAR(total, 1.0, 1e-9) << what << " seed " << seed;
}

TEST(Property, AttentionWeightsAreDistributions) {
  for (auto mech : {InteractionKind::attention, InteractionKind::memnet, InteractionKind::biattention}) {
    const Model model(testing::tiny_config(EncoderKind::avg_embed, mech), 30, 1);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      Rng rng(seed);
      const ModelInput in = testing::random_input(rng, 30, 6, 5, 0, 5);
      Tape tape(false);
      const AttentionTrace trace = model.forward(tape, in).trace;
      expect_distribution(trace.context_weights, "alpha", seed);
      expect_distribution(trace.beta, "beta", seed);
      for (const auto& row : trace.history_weights) expect_distribution(row, "history", seed);
    }
  }
}

TEST(Property, HistoryOrderDoesNotMatter) {
  for (auto mech : testing::kMechanisms) {
    const Model model(testing::tiny_config(EncoderKind::bilstm, mech), 30, 2);
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      Rng rng(seed);
      ModelInput in = testing::random_input(rng, 30, 4, 5, 2, 6);
      const double p = model.probability(in);
      rng.shuffle(in.history);
      EXPECT_EQ(model.probability(in), p) << "seed " << seed;
    }
  }
}

}  // namespace
}  // namespace reentry
