#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reentry/batching.hpp"
#include "reentry/config.hpp"
#include "reentry/metrics.hpp"
#include "reentry/model.hpp"
#include "reentry/parameters.hpp"

namespace reentry {

inline constexpr double kProbabilityFloor = 1e-12;

// -[lambda*y*log p + mu*(1-y)*log(1-p)] with p clamped to [1e-12, 1-1e-12].
double weighted_bce(double probability, int label, double lambda, double mu);
// Differentiable form; `probability` is 1 x 1. The clamp passes no gradient.
ad::Tensor weighted_bce(ad::Tape& tape, const ad::Tensor& probability, int label, double lambda, double mu);

struct OptimizerState {
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam update of every parameter, then zeroes the gradients.
// Throws OptimizerError naming any parameter that holds no gradient buffer.
void adam_step(ParameterStore& params, OptimizerState& state, double lr);

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before scaling.
double clip_gradients(ParameterStore& params, double max_norm);

// Encoded inputs with their labels, in instance order.
struct Dataset {
  std::vector<ModelInput> inputs;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
};

Dataset make_dataset(const std::vector<Instance>& instances, const Vocabulary& vocab, const BatchLimits& limits);

// Summed weighted loss of the whole set, without building a graph.
double dataset_loss(const Model& model, const Dataset& data, double lambda, double mu);
std::vector<double> predict_scores(const Model& model, const Dataset& data);
Metrics evaluate_dataset(const Model& model, const Dataset& data, double threshold);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_f1 = 0.0;
  std::optional<double> dev_auc;
  std::optional<double> train_f1;  // only with TrainOptions::track_train_f1

  nlohmann::json to_json() const;
};

struct TrainOptions {
  bool track_train_f1 = false;
  // Stop once train F1 reaches this value. Implies track_train_f1.
  std::optional<double> stop_at_train_f1;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  ParameterStore best;  // snapshot from best_epoch
  int best_epoch = 0;
  double best_dev_f1 = 0.0;
  std::optional<double> best_dev_auc;
  std::vector<EpochRecord> history;

  nlohmann::json history_json() const;
};

// Trains `model` in place with model.config(): seed-shuffled batches, summed
// batch loss, optional clipping, Adam. After each epoch the dev set is scored
// at the configured threshold. The parameters with the best dev F1 (earliest
// on ties) are restored into `model` and returned. Training stops at
// max_epochs or once `patience` consecutive epochs fail to improve, so
// patience 0 ends on the first non-improving epoch. With an empty dev set the
// train set stands in for it.
TrainResult train(Model& model, const Dataset& train_set, const Dataset& dev_set, const TrainOptions& options = {});

struct GridRow {
  double lr = 0.0;
  int best_epoch = 0;
  double dev_f1 = 0.0;
  std::optional<double> dev_auc;
};

struct GridResult {
  ModelConfig best_config;
  std::size_t best_index = 0;
  std::vector<GridRow> rows;
  ParameterStore best_parameters;
  std::vector<EpochRecord> best_history;

  nlohmann::json to_json() const;
};

// Runs on every freshly constructed model before training, e.g. to load
// pretrained embeddings.
using ModelInit = std::function<void(Model&)>;

// One fresh model per learning rate, all from the same seed. Selection is by
// dev F1, then larger dev AUC (absent counts lowest), then smaller lr.
GridResult grid_search(const ModelConfig& config, std::size_t vocab_size, const std::vector<double>& lr_grid,
                       const Dataset& train_set, const Dataset& dev_set, const TrainOptions& options = {},
                       const ModelInit& init = {});

inline const std::vector<double> kDefaultLrGrid = {1e-3, 1e-4, 1e-5};

}  // namespace reentry
