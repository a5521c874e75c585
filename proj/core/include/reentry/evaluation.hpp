#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "reentry/baselines.hpp"
#include "reentry/config.hpp"
#include "reentry/corpus.hpp"
#include "reentry/metrics.hpp"
#include "reentry/model.hpp"
#include "reentry/training.hpp"
#include "reentry/vocabulary.hpp"

namespace reentry {

// Row label such as "BiLSTM+BiA".
std::string display_name(const ModelConfig& config);

struct InstanceScore {
  std::string conversation_id;
  std::string target_user;
  int label = 0;
  double score = 0.0;
  int prediction = 0;
  std::size_t history_size = 0;
};

struct Evaluation {
  Metrics metrics;
  std::vector<InstanceScore> instances;
  std::vector<AttentionTrace> traces;  // filled only when requested

  nlohmann::json dump() const;  // per-instance rows
};

// Scores every instance; prediction = score > threshold. AUC is left empty
// when the labels hold one class. Throws on an empty set.
Evaluation evaluate(const Model& model, const Vocabulary& vocab, const std::vector<Instance>& instances,
                    double threshold, bool with_traces = false);

Evaluation evaluate_baseline(const BaselineOutput& output, const std::vector<Instance>& instances);

// One table row: model name, metrics and an optional parameter count.
struct ReportRow {
  std::string model;
  Metrics metrics;
  std::optional<std::size_t> parameter_count;
};

std::string format_table(const std::vector<ReportRow>& rows);
nlohmann::json rows_to_json(const std::vector<ReportRow>& rows);

// Instances of one entry order split by conversation, with the vocabulary
// built from the training conversations.
struct Experiment {
  int k = 1;
  Split split;
  Vocabulary vocab;
  InstanceSplit instances;
  Dataset train;
  Dataset dev;
};

struct ExperimentOptions {
  std::vector<double> lr_grid;        // empty: use config.lr
  std::size_t max_instances = 0;      // 0 keeps all; else the first n in corpus order
  bool retrain_per_k = true;          // k harness: otherwise the k=1 model is reused
  std::uint64_t baseline_seed = 0;    // 0: derive from config.seed
  TrainOptions train;
  ModelInit init;  // applied to every model before training
};

// Throws ProtocolError when no instance exists at k.
Experiment prepare_experiment(const Corpus& corpus, const ModelConfig& config, int k, const ExperimentOptions& options = {});

struct TrainedModel {
  Model model;
  std::vector<EpochRecord> history;
  std::optional<GridResult> grid;
};

TrainedModel fit(const Experiment& experiment, const ModelConfig& config, const ExperimentOptions& options = {});

// Random, History (threshold tuned on dev) and All-Yes rows on the test set.
std::vector<ReportRow> baseline_rows(const Corpus& corpus, const Experiment& experiment, std::uint64_t seed);

struct KReentryRow {
  int k = 0;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  std::vector<ReportRow> rows;
};

// Rebuilds instances at each k and trains (or reuses the k=1 model) and
// scores the model next to All-Yes and History.
std::vector<KReentryRow> harness_k_reentry(const Corpus& corpus, const ModelConfig& config, const std::vector<int>& ks,
                                           const ExperimentOptions& options = {});
nlohmann::json k_reentry_to_json(const std::vector<KReentryRow>& rows);
std::string format_k_reentry(const std::vector<KReentryRow>& rows);

// Inclusive history-length range; an absent upper bound is open.
struct HistoryBucket {
  std::size_t lo = 0;
  std::optional<std::size_t> hi;
  std::string label() const;
};

// Parses "0,1-5,6+" style lists. Throws std::invalid_argument unless the
// buckets cover 0.. without gaps or overlaps and end open.
std::vector<HistoryBucket> parse_buckets(const std::string& spec);
void validate_buckets(const std::vector<HistoryBucket>& buckets);

struct BucketRow {
  HistoryBucket bucket;
  std::size_t count = 0;
  std::optional<double> f1;  // absent for an empty bucket
};

// Buckets by the instance's full history length (before any limit).
std::vector<BucketRow> harness_varying_history(const Evaluation& evaluation, const std::vector<HistoryBucket>& buckets);
nlohmann::json buckets_to_json(const std::vector<BucketRow>& rows);
std::string format_buckets(const std::vector<BucketRow>& rows);

struct AblationReport {
  std::uint64_t split_hash = 0;
  std::vector<ReportRow> rows;               // full, W/O SML, W/O Meta, W/O History
  std::vector<std::uint64_t> row_split_hashes;

  nlohmann::json to_json() const;
};

// Shared seed and split; four trained variants scored on the test set.
AblationReport run_ablation(const Corpus& corpus, const ModelConfig& base, const ExperimentOptions& options = {});

// The variant configs in report order, with their row names.
std::vector<std::pair<std::string, ModelConfig>> ablation_variants(const ModelConfig& base);

}  // namespace reentry
