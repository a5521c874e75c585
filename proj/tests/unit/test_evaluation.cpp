#include <gtest/gtest.h>

#include "reentry/baselines.hpp"
#include "reentry/errors.hpp"
#include "reentry/evaluation.hpp"
#include "reentry/metrics.hpp"
#include "reentry/synthetic.hpp"
#include "support.hpp"

namespace reentry {
namespace {

using testing::turn;

TEST(Auc, Examples) {
  EXPECT_EQ(auc(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}), 1.0);
  EXPECT_EQ(auc(std::vector<double>{0.5, 0.5}, std::vector<int>{1, 0}), 0.5);
  EXPECT_EQ(auc(std::vector<double>{0.4, 0.3, 0.8}, std::vector<int>{1, 0, 0}), 0.5);
}

TEST(Auc, SingleClassIsUndefined) {
  EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), UndefinedMetricError);
  EXPECT_THROW(auc(std::vector<double>{}, std::vector<int>{}), UndefinedMetricError);
  EXPECT_THROW(auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), std::invalid_argument);
}

TEST(Prf1, AllYesWorkedExample) {
  const std::vector<int> labels = {1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
  const Metrics m = prf1(std::vector<int>(10, 1), labels);
  EXPECT_DOUBLE_EQ(m.precision, 0.3);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_NEAR(m.f1, 0.4615, 1e-4);
  EXPECT_EQ(m.tp, 3u);
  EXPECT_EQ(m.fp, 7u);
}

TEST(Prf1, PerfectAndSilentPredictions) {
  const std::vector<int> labels = {1, 0, 1, 0};
  const Metrics perfect = prf1(labels, labels);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);
  const Metrics silent = prf1(std::vector<int>(4, 0), labels);
  EXPECT_EQ(silent.precision, 1.0);
  EXPECT_EQ(silent.recall, 0.0);
  EXPECT_EQ(silent.f1, 0.0);
  EXPECT_THROW(prf1(std::vector<int>{}, std::vector<int>{}), std::invalid_argument);
  EXPECT_THROW(prf1(std::vector<int>{1}, std::vector<int>{1, 0}), std::invalid_argument);
}

TEST(ScoreMetrics, StrictThresholdAndAbsentAuc) {
  const std::vector<double> scores = {0.5, 0.6, 0.2};
  EXPECT_EQ(threshold_scores(scores, 0.5), (std::vector<int>{0, 1, 0}));
  const Metrics m = score_metrics(scores, std::vector<int>{1, 1, 1}, 0.5);
  EXPECT_FALSE(m.auc.has_value());
  EXPECT_DOUBLE_EQ(m.recall, 1.0 / 3.0);
  EXPECT_TRUE(m.to_json().at("auc").is_null());
}

TEST(Baselines, RandomIsSeededAndFair) {
  const auto a = baseline_random(1000, 7);
  EXPECT_EQ(a.predictions, baseline_random(1000, 7).predictions);
  EXPECT_NE(a.predictions, baseline_random(1000, 8).predictions);
  std::vector<int> labels(1000);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    correct += a.predictions[i] == labels[i];
    EXPECT_EQ(a.predictions[i], a.scores[i] > 0.5 ? 1 : 0);
  }
  EXPECT_NEAR(static_cast<double>(correct) / 1000.0, 0.5, 0.1);
  EXPECT_NEAR(auc(a.scores, labels), 0.5, 0.05);
}

TEST(Baselines, AllYes) {
  const auto out = baseline_allyes(10);
  EXPECT_EQ(out.predictions, std::vector<int>(10, 1));
  const std::vector<int> labels = {1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_DOUBLE_EQ(prf1(out.predictions, labels).recall, 1.0);
  EXPECT_DOUBLE_EQ(prf1(out.predictions, labels).precision, 0.3);
  EXPECT_EQ(prf1(out.predictions, std::vector<int>(10, 0)).f1, 0.0);
}

// `reentered` of the user's earlier conversations get a second entry; the
// target conversation "t" starts after all of them.
Corpus history_corpus(int earlier, int reentered) {
  std::vector<Conversation> convs;
  std::int64_t clock = 0;
  for (int i = 0; i < earlier; ++i) {
    Conversation c{"p" + std::to_string(i), {}};
    c.turns.push_back(turn(1, 0, "u", {"x"}, ++clock));
    c.turns.push_back(turn(2, 1, "v", {"y"}, ++clock));
    if (i < reentered) c.turns.push_back(turn(3, 2, "u", {"z"}, ++clock));
    convs.push_back(std::move(c));
  }
  convs.push_back({"t", {turn(1, 0, "v", {"a"}, ++clock), turn(2, 1, "u", {"b"}, ++clock), turn(3, 2, "w", {"c"}, ++clock)}});
  return make_corpus(std::move(convs));
}

Instance target_instance(const Corpus& corpus) { return *instance_for(corpus, "t", "u", 1); }

TEST(Baselines, HistoryRateAgainstThreshold) {
  const Corpus corpus = history_corpus(5, 3);
  const ParticipationIndex index(corpus);
  const auto rate = index.rate("u", corpus.conversations.back().turns[1].time, "t", 1);
  EXPECT_EQ(rate.entered, 5u);
  EXPECT_EQ(rate.reentered, 3u);
  const auto out = baseline_history({target_instance(corpus)}, index, 0.5, 1);
  EXPECT_EQ(out.predictions, std::vector<int>{1});
  EXPECT_EQ(out.random_fallbacks, 0u);
  EXPECT_DOUBLE_EQ(out.scores[0], 0.6);
}

TEST(Baselines, HistoryTieIsNo) {
  const Corpus corpus = history_corpus(4, 2);
  const auto out = baseline_history({target_instance(corpus)}, ParticipationIndex(corpus), 0.5, 1);
  EXPECT_EQ(out.predictions, std::vector<int>{0});
}

TEST(Baselines, HistoryWithoutPastUsesCoin) {
  const Corpus corpus = history_corpus(0, 0);
  const std::vector<Instance> one = {target_instance(corpus)};
  const ParticipationIndex index(corpus);
  const auto out = baseline_history(one, index, 0.5, 3);
  EXPECT_EQ(out.random_fallbacks, 1u);
  EXPECT_EQ(out.predictions, baseline_history(one, index, 0.5, 3).predictions);
}

TEST(Baselines, HistoryIgnoresConversationsStillOpen) {
  // p0 ends after u's entry into t, so it is not yet known.
  std::vector<Conversation> convs = {
      {"p0", {turn(1, 0, "u", {"x"}, 1), turn(2, 1, "v", {"y"}, 2), turn(3, 2, "u", {"z"}, 50)}},
      {"t", {turn(1, 0, "v", {"a"}, 10), turn(2, 1, "u", {"b"}, 11)}}};
  const Corpus corpus = make_corpus(std::move(convs));
  EXPECT_EQ(ParticipationIndex(corpus).rate("u", 11, "t", 1).entered, 0u);
}

TEST(Baselines, ThresholdTuningPrefersLowestOnTies) {
  EXPECT_EQ(tune_history_threshold({}, ParticipationIndex(history_corpus(0, 0)), 1), 0.5);
  // One positive instance with rate 0.6: every threshold below 0.6 is perfect.
  Corpus corpus = history_corpus(5, 3);
  corpus.conversations.back().turns.push_back(turn(4, 3, "u", {"again"}, 1000));
  corpus = make_corpus(corpus.conversations);
  const Instance inst = target_instance(corpus);
  ASSERT_EQ(inst.label, 1);
  EXPECT_DOUBLE_EQ(tune_history_threshold({inst}, ParticipationIndex(corpus), 1), 0.1);
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SyntheticConfig sc;
    sc.n_users = 25;
    sc.n_convs = 80;
    sc.seed = 11;
    corpus_ = new Corpus(make_corpus(generate_synthetic(sc)));
  }
  static void TearDownTestSuite() { delete corpus_; }

  static ModelConfig config() {
    ModelConfig c = testing::tiny_config(EncoderKind::avg_embed, InteractionKind::attention);
    c.max_epochs = 2;
    c.batch_size = 16;
    return c;
  }

  static Corpus* corpus_;
};
Corpus* Pipeline::corpus_ = nullptr;

TEST_F(Pipeline, EvaluateThresholdEdges) {
  const Experiment ex = prepare_experiment(*corpus_, config(), 1);
  const Model model(config(), ex.vocab.size(), 1);
  const auto& test = ex.instances.test;
  const Evaluation all = evaluate(model, ex.vocab, test, 0.0);
  const Evaluation allyes = evaluate_baseline(baseline_allyes(test.size()), test);
  EXPECT_EQ(all.metrics.recall, 1.0);
  EXPECT_EQ(all.metrics.f1, allyes.metrics.f1);
  const Evaluation none = evaluate(model, ex.vocab, test, 1.0);
  EXPECT_EQ(none.metrics.tp + none.metrics.fp, 0u);
  EXPECT_THROW(evaluate(model, ex.vocab, {}, 0.5), std::invalid_argument);
}

TEST_F(Pipeline, DuplicatingTheSetKeepsRates) {
  const Experiment ex = prepare_experiment(*corpus_, config(), 1);
  const Model model(config(), ex.vocab.size(), 2);
  std::vector<Instance> twice = ex.instances.test;
  twice.insert(twice.end(), ex.instances.test.begin(), ex.instances.test.end());
  const Metrics a = evaluate(model, ex.vocab, ex.instances.test, 0.5).metrics;
  const Metrics b = evaluate(model, ex.vocab, twice, 0.5).metrics;
  EXPECT_EQ(a.auc, b.auc);
  EXPECT_EQ(a.f1, b.f1);
  EXPECT_EQ(a.precision, b.precision);
  EXPECT_EQ(a.recall, b.recall);
  EXPECT_EQ(2 * a.tp, b.tp);
}

TEST_F(Pipeline, DumpReproducesConfusionMatrix) {
  const Experiment ex = prepare_experiment(*corpus_, config(), 1);
  const Model model(config(), ex.vocab.size(), 3);
  const Evaluation ev = evaluate(model, ex.vocab, ex.instances.test, 0.5, true);
  ASSERT_EQ(ev.traces.size(), ev.instances.size());
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& row : ev.dump()) {
    scores.push_back(row.at("score").get<double>());
    labels.push_back(row.at("label").get<int>());
    EXPECT_EQ(row.at("prediction").get<int>(), row.at("score").get<double>() > 0.5 ? 1 : 0);
  }
  const Metrics again = score_metrics(scores, labels, 0.5);
  EXPECT_EQ(again.tp, ev.metrics.tp);
  EXPECT_EQ(again.fp, ev.metrics.fp);
  EXPECT_EQ(again.tn, ev.metrics.tn);
  EXPECT_EQ(again.fn, ev.metrics.fn);
  EXPECT_EQ(again.auc, ev.metrics.auc);
}

TEST_F(Pipeline, ExperimentUsesTrainVocabularyOnly) {
  const Experiment ex = prepare_experiment(*corpus_, config(), 1);
  EXPECT_EQ(ex.train.size(), ex.instances.train.size());
  EXPECT_EQ(ex.dev.size(), ex.instances.dev.size());
  std::vector<Conversation> train_convs;
  for (const auto& c : corpus_->conversations)
    if (std::find(ex.split.train.begin(), ex.split.train.end(), c.id) != ex.split.train.end()) train_convs.push_back(c);
  EXPECT_EQ(ex.vocab.hash(), build_vocabulary(train_convs).hash());
  EXPECT_THROW(prepare_experiment(*corpus_, config(), 50), ProtocolError);
}

TEST_F(Pipeline, MaxInstancesTruncates) {
  ExperimentOptions o;
  o.max_instances = 40;
  const Experiment ex = prepare_experiment(*corpus_, config(), 1, o);
  EXPECT_EQ(ex.instances.train.size() + ex.instances.dev.size() + ex.instances.test.size(), 40u);
}

TEST_F(Pipeline, KReentryHarness) {
  const auto rows = harness_k_reentry(*corpus_, config(), {1, 2, 3});
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].k, static_cast<int>(i + 1));
    ASSERT_EQ(rows[i].rows.size(), 3u);
    EXPECT_EQ(rows[i].rows[1].model, "All-Yes");
    EXPECT_EQ(rows[i].rows[2].model, "History");
    if (i > 0) {
      EXPECT_LE(rows[i].train_count, rows[i - 1].train_count);
      EXPECT_LE(rows[i].test_count, rows[i - 1].test_count);
    }
  }
  const Experiment ex = prepare_experiment(*corpus_, config(), 1);
  const TrainedModel tm = fit(ex, config());
  EXPECT_EQ(rows[0].rows[0].metrics.f1, evaluate(tm.model, ex.vocab, ex.instances.test, 0.5).metrics.f1);
  EXPECT_EQ(k_reentry_to_json(rows).size(), 3u);
  EXPECT_NE(format_k_reentry(rows).find("All-Yes"), std::string::npos);
  EXPECT_THROW(harness_k_reentry(*corpus_, config(), {1, 50}), ProtocolError);
}

TEST_F(Pipeline, KReentryCanReuseFirstModel) {
  ExperimentOptions o;
  o.retrain_per_k = false;
  const auto rows = harness_k_reentry(*corpus_, config(), {1, 2}, o);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].rows.size(), 3u);
}

TEST(HistoryBuckets, ParseAndLabel) {
  const auto b = parse_buckets("0,1-5,6+");
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].label(), "0");
  EXPECT_EQ(b[1].label(), "1-5");
  EXPECT_EQ(b[2].label(), "6+");
  EXPECT_THROW(parse_buckets("1-5,6+"), std::invalid_argument);
  EXPECT_THROW(parse_buckets("0,2-5,6+"), std::invalid_argument);
  EXPECT_THROW(parse_buckets("0,1-5"), std::invalid_argument);
  EXPECT_THROW(parse_buckets("0,1-x"), std::invalid_argument);
}

Evaluation fake_evaluation(const std::vector<std::size_t>& history_sizes) {
  Evaluation ev;
  for (std::size_t i = 0; i < history_sizes.size(); ++i) {
    InstanceScore s;
    s.label = static_cast<int>(i % 2);
    s.prediction = 1;
    s.history_size = history_sizes[i];
    ev.instances.push_back(s);
  }
  return ev;
}

TEST(HistoryBuckets, PartitionCountsEveryInstanceOnce) {
  const auto rows = harness_varying_history(fake_evaluation({0, 0, 3, 7, 12, 5}), parse_buckets("0,1-5,6+"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].count, 2u);
  EXPECT_EQ(rows[1].count, 2u);
  EXPECT_EQ(rows[2].count, 2u);
  std::size_t total = 0;
  for (const auto& r : rows) total += r.count;
  EXPECT_EQ(total, 6u);
}

TEST(HistoryBuckets, EmptyBucketHasNoF1) {
  const auto rows = harness_varying_history(fake_evaluation({0, 8}), parse_buckets("0,1-5,6+"));
  EXPECT_EQ(rows[1].count, 0u);
  EXPECT_FALSE(rows[1].f1.has_value());
  EXPECT_TRUE(buckets_to_json(rows)[1].at("f1").is_null());
  EXPECT_NE(format_buckets(rows).find("1-5"), std::string::npos);
}

TEST(Report, TableLayout) {
  Metrics m;
  m.auc = 0.627;
  m.f1 = 0.611;
  m.precision = 0.5;
  m.recall = 1.0;
  const std::string t = format_table({{"BiLSTM+BiA", m, std::nullopt}, {"All-Yes", Metrics{}, std::nullopt}});
  EXPECT_NE(t.find("AUC"), std::string::npos);
  EXPECT_NE(t.find("62.7"), std::string::npos);
  EXPECT_NE(t.find("100.0"), std::string::npos);
  EXPECT_EQ(rows_to_json({{"x", m, 12}})[0].at("parameter_count"), 12);
}

TEST(Report, DisplayNames) {
  EXPECT_EQ(display_name(testing::tiny_config(EncoderKind::bilstm, InteractionKind::biattention)), "BiLSTM+BiA");
  EXPECT_EQ(display_name(testing::tiny_config(EncoderKind::cnn, InteractionKind::memnet)), "CNN+Mem");
  EXPECT_EQ(display_name(testing::tiny_config(EncoderKind::avg_embed, InteractionKind::concat)), "Avg-Embed+Con");
}

TEST_F(Pipeline, AblationMechanics) {
  const ModelConfig base = testing::tiny_config(EncoderKind::bilstm, InteractionKind::biattention);
  const auto variants = ablation_variants(base);
  ASSERT_EQ(variants.size(), 4u);
  EXPECT_EQ(variants[1].first, "W/O SML");
  EXPECT_EQ(variants[2].first, "W/O Meta");
  EXPECT_EQ(variants[3].first, "W/O History");
  EXPECT_LT(Model(variants[2].second, 30, 1).parameters().scalar_count(), Model(base, 30, 1).parameters().scalar_count());

  ModelConfig quick = base;
  quick.max_epochs = 1;
  const AblationReport report = run_ablation(*corpus_, quick);
  ASSERT_EQ(report.rows.size(), 4u);
  for (auto h : report.row_split_hashes) EXPECT_EQ(h, report.split_hash);
  EXPECT_EQ(report.to_json().at("rows").size(), 4u);
}

TEST_F(Pipeline, HistoryFreeVariantIgnoresHistory) {
  ModelConfig c = ablation_variants(config())[3].second;
  const Experiment ex = prepare_experiment(*corpus_, c, 1);
  Experiment stripped = ex;
  for (auto* part : {&stripped.instances.train, &stripped.instances.dev, &stripped.instances.test})
    for (auto& inst : *part) inst.history.clear();
  for (auto* d : {&stripped.train, &stripped.dev})
    for (auto& in : d->inputs) in.history.clear();
  const TrainedModel a = fit(ex, c);
  const TrainedModel b = fit(stripped, c);
  EXPECT_EQ(evaluate(a.model, ex.vocab, ex.instances.test, 0.5).metrics.to_json().dump(),
            evaluate(b.model, stripped.vocab, stripped.instances.test, 0.5).metrics.to_json().dump());
}

}  // namespace
}  // namespace reentry
