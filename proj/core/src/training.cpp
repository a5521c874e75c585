#include "reentry/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "reentry/errors.hpp"
#include "reentry/random.hpp"

namespace reentry {

using ad::Tape;
using ad::Tensor;

namespace {

double clamp_probability(double p) { return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor); }

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::string norm_report(const ParameterStore& params) {
  std::ostringstream out;
  for (const auto& [name, t] : params.all()) {
    double sq = 0.0;
    for (double v : t.values()) sq += v * v;
    out << "\n  " << name << ": |w|=" << std::sqrt(sq);
    if (t.has_grad()) {
      double gsq = 0.0;
      for (double g : t.grad()) gsq += g * g;
      out << " |g|=" << std::sqrt(gsq);
    }
  }
  return out.str();
}

}  // namespace

double weighted_bce(double probability, int label, double lambda, double mu) {
  const double p = clamp_probability(probability);
  return label == 1 ? -lambda * std::log(p) : -mu * std::log(1.0 - p);
}

Tensor weighted_bce(Tape& tape, const Tensor& probability, int label, double lambda, double mu) {
  if (probability.size() != 1) throw ShapeError("weighted_bce: probability must be a single value");
  const double raw = probability.item();
  const double p = clamp_probability(raw);
  Tensor out = Tensor::scalar(weighted_bce(raw, label, lambda, mu));
  const bool clamped = p != raw;
  ad::TensorImpl* pi = probability.impl();
  ad::TensorImpl* o = out.impl();
  tape.record({probability}, out, [pi, o, p, label, lambda, mu, clamped] {
    if (clamped) return;
    const double d = label == 1 ? -lambda / p : mu / (1.0 - p);
    ad::grad_of(*pi)[0] += d * o->grad[0];
  });
  return out;
}

void adam_step(ParameterStore& params, OptimizerState& state, double lr) {
  for (const auto& [name, t] : params.all()) {
    if (!t.has_grad()) throw OptimizerError("parameter '" + name + "' has no gradient");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (const auto& [name, const_t] : params.all()) {
    Tensor t = const_t;
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    if (m.empty()) {
      m.assign(t.size(), 0.0);
      v.assign(t.size(), 0.0);
    }
    if (m.size() != t.size() || v.size() != t.size()) throw OptimizerError("moment shape mismatch for '" + name + "'");
    auto w = t.mutable_values();
    auto g = t.grad_mut();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    std::fill(g.begin(), g.end(), 0.0);
  }
}

double clip_gradients(ParameterStore& params, double max_norm) {
  const double norm = params.grad_norm();
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (const auto& [name, const_t] : params.all()) {
      Tensor t = const_t;
      for (double& g : t.grad_mut()) g *= factor;
    }
  }
  return norm;
}

Dataset make_dataset(const std::vector<Instance>& instances, const Vocabulary& vocab, const BatchLimits& limits) {
  Dataset d;
  d.inputs.reserve(instances.size());
  d.labels.reserve(instances.size());
  for (const auto& inst : instances) {
    d.inputs.push_back(prepare_input(inst, vocab, limits));
    d.labels.push_back(inst.label);
  }
  return d;
}

double dataset_loss(const Model& model, const Dataset& data, double lambda, double mu) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total += weighted_bce(model.probability(data.inputs[i]), data.labels[i], lambda, mu);
  }
  return total;
}

std::vector<double> predict_scores(const Model& model, const Dataset& data) {
  std::vector<double> scores;
  scores.reserve(data.size());
  for (const auto& in : data.inputs) scores.push_back(model.probability(in));
  return scores;
}

Metrics evaluate_dataset(const Model& model, const Dataset& data, double threshold) {
  const auto scores = predict_scores(model, data);
  return score_metrics(scores, data.labels, threshold);
}

nlohmann::json EpochRecord::to_json() const {
  nlohmann::json j = {{"epoch", epoch}, {"train_loss", train_loss}, {"dev_f1", dev_f1}, {"dev_auc", optional_json(dev_auc)}};
  if (train_f1) j["train_f1"] = *train_f1;
  return j;
}

nlohmann::json TrainResult::history_json() const {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& r : history) epochs.push_back(r.to_json());
  return {{"best_epoch", best_epoch}, {"best_dev_f1", best_dev_f1}, {"best_dev_auc", optional_json(best_dev_auc)},
          {"epochs", epochs}};
}

TrainResult train(Model& model, const Dataset& train_set, const Dataset& dev_set, const TrainOptions& options) {
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (train_set.inputs.size() != train_set.labels.size()) throw std::invalid_argument("train: inputs and labels differ");
  const ModelConfig& cfg = model.config();
  const Dataset& selection = dev_set.empty() ? train_set : dev_set;
  const bool track_train = options.track_train_f1 || options.stop_at_train_f1.has_value();

  ParameterStore& params = model.parameters();
  OptimizerState opt;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  result.best_dev_f1 = -1.0;
  int stale = 0;
  params.zero_grad();

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      params.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        Tape tape;
        const Tensor p = model.forward(tape, train_set.inputs[i]).probability;
        const Tensor loss = weighted_bce(tape, p, train_set.labels[i], cfg.lambda, cfg.mu);
        batch_loss += loss.item();
        tape.backward(loss);
      }
      const double gnorm = params.grad_norm();
      if (!std::isfinite(batch_loss) || !std::isfinite(gnorm)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch " << batch_index << " (loss " << batch_loss
            << ", gradient norm " << gnorm << "); parameter norms:" << norm_report(params);
        throw TrainingError(msg.str());
      }
      clip_gradients(params, cfg.clip_norm);
      adam_step(params, opt, cfg.lr);
      epoch_loss += batch_loss;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = epoch_loss;
    const Metrics dev = evaluate_dataset(model, selection, cfg.threshold);
    record.dev_f1 = dev.f1;
    record.dev_auc = dev.auc;
    if (track_train) record.train_f1 = evaluate_dataset(model, train_set, cfg.threshold).f1;
    result.history.push_back(record);
    if (options.on_epoch) options.on_epoch(record);

    if (dev.f1 > result.best_dev_f1) {
      result.best_dev_f1 = dev.f1;
      result.best_dev_auc = dev.auc;
      result.best_epoch = epoch;
      result.best = params.snapshot();
      stale = 0;
    } else {
      ++stale;
    }
    if (options.stop_at_train_f1 && record.train_f1 && *record.train_f1 >= *options.stop_at_train_f1) break;
    if (stale > cfg.patience) break;
  }

  params.assign(result.best);
  params.zero_grad();
  return result;
}

nlohmann::json GridResult::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back(
        {{"lr", r.lr}, {"best_epoch", r.best_epoch}, {"dev_f1", r.dev_f1}, {"dev_auc", optional_json(r.dev_auc)}});
  }
  return {{"selected_lr", best_config.lr}, {"rows", rows_json}};
}

GridResult grid_search(const ModelConfig& config, std::size_t vocab_size, const std::vector<double>& lr_grid,
                       const Dataset& train_set, const Dataset& dev_set, const TrainOptions& options,
                       const ModelInit& init) {
  if (lr_grid.empty()) throw std::invalid_argument("grid_search: empty learning-rate grid");
  GridResult out;
  auto better = [](const GridRow& a, const GridRow& b) {
    if (a.dev_f1 != b.dev_f1) return a.dev_f1 > b.dev_f1;
    const double auc_a = a.dev_auc.value_or(-1.0);
    const double auc_b = b.dev_auc.value_or(-1.0);
    if (auc_a != auc_b) return auc_a > auc_b;
    return a.lr < b.lr;
  };
  for (std::size_t i = 0; i < lr_grid.size(); ++i) {
    ModelConfig cfg = config;
    cfg.lr = lr_grid[i];
    Model model(cfg, vocab_size, cfg.seed);
    if (init) init(model);
    TrainResult tr = train(model, train_set, dev_set, options);
    GridRow row{cfg.lr, tr.best_epoch, tr.best_dev_f1, tr.best_dev_auc};
    out.rows.push_back(row);
    if (i == 0 || better(row, out.rows[out.best_index])) {
      out.best_index = i;
      out.best_config = cfg;
      out.best_parameters = std::move(tr.best);
      out.best_history = std::move(tr.history);
    }
  }
  return out;
}

}  // namespace reentry
