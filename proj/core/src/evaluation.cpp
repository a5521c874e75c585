#include "reentry/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "reentry/errors.hpp"

namespace reentry {

namespace {

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

std::vector<int> labels_of(const std::vector<Instance>& instances) {
  std::vector<int> labels;
  labels.reserve(instances.size());
  for (const auto& i : instances) labels.push_back(i.label);
  return labels;
}

std::uint64_t baseline_seed(const ModelConfig& config, const ExperimentOptions& options) {
  return options.baseline_seed != 0 ? options.baseline_seed : config.seed;
}

std::string align_table(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> widths;
  for (const auto& row : cells) {
    widths.resize(std::max(widths.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      if (c == 0) {
        out << std::left << std::setw(static_cast<int>(widths[c])) << cells[r][c];
      } else {
        out << "  " << std::right << std::setw(static_cast<int>(widths[c])) << cells[r][c];
      }
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : widths) total += w;
      out << std::string(total + 2 * (widths.size() - 1), '-') << '\n';
    }
  }
  return out.str();
}

}  // namespace

std::string display_name(const ModelConfig& c) {
  std::string enc;
  switch (c.encoder) {
    case EncoderKind::avg_embed: enc = "Avg-Embed"; break;
    case EncoderKind::cnn: enc = "CNN"; break;
    case EncoderKind::bilstm: enc = "BiLSTM"; break;
  }
  switch (c.interaction) {
    case InteractionKind::none: return enc + " (context only)";
    case InteractionKind::concat: return enc + "+Con";
    case InteractionKind::attention: return enc + "+Att";
    case InteractionKind::memnet: return enc + "+Mem";
    case InteractionKind::biattention: return enc + "+BiA";
  }
  return enc;
}

nlohmann::json Evaluation::dump() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : instances) {
    rows.push_back({{"conversation_id", s.conversation_id},
                    {"target_user", s.target_user},
                    {"label", s.label},
                    {"score", s.score},
                    {"prediction", s.prediction},
                    {"history_size", s.history_size}});
  }
  return rows;
}

Evaluation evaluate(const Model& model, const Vocabulary& vocab, const std::vector<Instance>& instances,
                    double threshold, bool with_traces) {
  if (instances.empty()) throw std::invalid_argument("evaluate: empty instance set");
  if (vocab.size() != model.vocab_size()) throw LoadError("evaluate: model and vocabulary sizes differ");
  Evaluation ev;
  std::vector<double> scores;
  for (const auto& inst : instances) {
    const ModelInput input = prepare_input(inst, vocab, model.config().limits);
    ad::Tape tape(false);
    ForwardResult fr = model.forward(tape, input);
    const double p = fr.probability.item();
    scores.push_back(p);
    ev.instances.push_back({inst.conversation_id, inst.target_user, inst.label, p, p > threshold ? 1 : 0,
                            inst.history.size()});
    if (with_traces) ev.traces.push_back(std::move(fr.trace));
  }
  ev.metrics = score_metrics(scores, labels_of(instances), threshold);
  return ev;
}

Evaluation evaluate_baseline(const BaselineOutput& output, const std::vector<Instance>& instances) {
  if (instances.empty()) throw std::invalid_argument("evaluate_baseline: empty instance set");
  if (output.predictions.size() != instances.size()) throw std::invalid_argument("evaluate_baseline: size mismatch");
  Evaluation ev;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    ev.instances.push_back({inst.conversation_id, inst.target_user, inst.label, output.scores[i],
                            output.predictions[i], inst.history.size()});
  }
  const auto labels = labels_of(instances);
  ev.metrics = prf1(output.predictions, labels);
  try {
    ev.metrics.auc = auc(output.scores, labels);
  } catch (const UndefinedMetricError&) {
  }
  return ev;
}

std::string format_table(const std::vector<ReportRow>& rows) {
  const bool with_params = std::any_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.parameter_count.has_value(); });
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"Model", "AUC", "F1", "Precision", "Recall"});
  if (with_params) cells.back().push_back("Params");
  for (const auto& r : rows) {
    cells.push_back({r.model, r.metrics.auc ? percent(*r.metrics.auc) : "-", percent(r.metrics.f1),
                     percent(r.metrics.precision), percent(r.metrics.recall)});
    if (with_params) cells.back().push_back(r.parameter_count ? std::to_string(*r.parameter_count) : "-");
  }
  return align_table(cells);
}

nlohmann::json rows_to_json(const std::vector<ReportRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j = {{"model", r.model}, {"metrics", r.metrics.to_json()}};
    if (r.parameter_count) j["parameter_count"] = *r.parameter_count;
    out.push_back(j);
  }
  return out;
}

Experiment prepare_experiment(const Corpus& corpus, const ModelConfig& config, int k, const ExperimentOptions& options) {
  Experiment ex;
  ex.k = k;
  auto all = build_instances(corpus, k);
  if (options.max_instances > 0 && all.size() > options.max_instances) all.resize(options.max_instances);
  if (all.empty()) throw ProtocolError("no instance has " + std::to_string(k) + " entries");

  ex.split = split_conversations(conversation_ids(corpus), config.split_ratios, config.seed);
  const auto assignment = ex.split.assignment();
  std::vector<Conversation> train_convs;
  for (const auto& conv : corpus.conversations) {
    auto it = assignment.find(conv.id);
    if (it != assignment.end() && it->second == "train") train_convs.push_back(conv);
  }
  ex.vocab = build_vocabulary(train_convs, config.min_count);
  ex.instances = partition(all, ex.split);
  if (ex.instances.train.empty()) throw ProtocolError("no training instance at k=" + std::to_string(k));
  ex.train = make_dataset(ex.instances.train, ex.vocab, config.limits);
  ex.dev = make_dataset(ex.instances.dev, ex.vocab, config.limits);
  return ex;
}

TrainedModel fit(const Experiment& experiment, const ModelConfig& config, const ExperimentOptions& options) {
  if (!options.lr_grid.empty()) {
    GridResult grid = grid_search(config, experiment.vocab.size(), options.lr_grid, experiment.train, experiment.dev,
                                  options.train, options.init);
    Model model(grid.best_config, experiment.vocab.size(), grid.best_config.seed);
    model.parameters().assign(grid.best_parameters);
    auto history = grid.best_history;
    return {std::move(model), std::move(history), std::move(grid)};
  }
  Model model(config, experiment.vocab.size(), config.seed);
  if (options.init) options.init(model);
  TrainResult tr = train(model, experiment.train, experiment.dev, options.train);
  return {std::move(model), std::move(tr.history), std::nullopt};
}

std::vector<ReportRow> baseline_rows(const Corpus& corpus, const Experiment& experiment, std::uint64_t seed) {
  const auto& test = experiment.instances.test;
  if (test.empty()) throw ProtocolError("empty test set");
  const ParticipationIndex index(corpus);
  const double t = tune_history_threshold(experiment.instances.dev, index, seed);
  return {
      {"Random", evaluate_baseline(baseline_random(test.size(), seed), test).metrics, std::nullopt},
      {"History", evaluate_baseline(baseline_history(test, index, t, seed), test).metrics, std::nullopt},
      {"All-Yes", evaluate_baseline(baseline_allyes(test.size()), test).metrics, std::nullopt},
  };
}

std::vector<KReentryRow> harness_k_reentry(const Corpus& corpus, const ModelConfig& config, const std::vector<int>& ks,
                                           const ExperimentOptions& options) {
  std::vector<KReentryRow> out;
  std::optional<Model> reused;
  std::optional<Vocabulary> reused_vocab;
  const std::uint64_t seed = baseline_seed(config, options);
  for (int k : ks) {
    const Experiment ex = prepare_experiment(corpus, config, k, options);
    if (ex.instances.test.empty()) throw ProtocolError("no test instance at k=" + std::to_string(k));
    KReentryRow row;
    row.k = k;
    row.train_count = ex.instances.train.size();
    row.test_count = ex.instances.test.size();

    Evaluation ev;
    if (options.retrain_per_k || !reused) {
      TrainedModel tm = fit(ex, config, options);
      ev = evaluate(tm.model, ex.vocab, ex.instances.test, tm.model.config().threshold);
      if (!options.retrain_per_k) {
        reused.emplace(std::move(tm.model));
        reused_vocab = ex.vocab;
      }
    } else {
      ev = evaluate(*reused, *reused_vocab, ex.instances.test, reused->config().threshold);
    }
    row.rows.push_back({display_name(config), ev.metrics, std::nullopt});
    auto baselines = baseline_rows(corpus, ex, seed);
    row.rows.push_back(baselines[2]);  // All-Yes
    row.rows.push_back(baselines[1]);  // History
    out.push_back(std::move(row));
  }
  return out;
}

nlohmann::json k_reentry_to_json(const std::vector<KReentryRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"k", r.k}, {"train_count", r.train_count}, {"test_count", r.test_count}, {"rows", rows_to_json(r.rows)}});
  }
  return out;
}

std::string format_k_reentry(const std::vector<KReentryRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"k", "Test", "Model", "F1"});
  for (const auto& r : rows) {
    for (const auto& m : r.rows) {
      cells.push_back({std::to_string(r.k), std::to_string(r.test_count), m.model, percent(m.metrics.f1)});
    }
  }
  return align_table(cells);
}

std::string HistoryBucket::label() const {
  if (!hi) return std::to_string(lo) + "+";
  if (*hi == lo) return std::to_string(lo);
  return std::to_string(lo) + "-" + std::to_string(*hi);
}

void validate_buckets(const std::vector<HistoryBucket>& buckets) {
  if (buckets.empty()) throw std::invalid_argument("history buckets: none given");
  std::size_t expect = 0;
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    const auto& b = buckets[i];
    if (b.lo != expect) throw std::invalid_argument("history buckets must start at 0 and leave no gap or overlap");
    if (!b.hi) {
      if (i + 1 != buckets.size()) throw std::invalid_argument("only the last history bucket may be open");
      return;
    }
    if (*b.hi < b.lo) throw std::invalid_argument("history bucket upper bound below lower bound");
    expect = *b.hi + 1;
  }
  throw std::invalid_argument("the last history bucket must be open (e.g. 6+)");
}

std::vector<HistoryBucket> parse_buckets(const std::string& spec) {
  auto number = [&](std::string_view s) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
      throw std::invalid_argument("bad history bucket '" + spec + "'");
    }
    return v;
  };
  std::vector<HistoryBucket> out;
  std::stringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) throw std::invalid_argument("bad history bucket '" + spec + "'");
    HistoryBucket b;
    if (item.back() == '+') {
      b.lo = number(std::string_view(item).substr(0, item.size() - 1));
    } else if (auto dash = item.find('-'); dash != std::string::npos) {
      b.lo = number(std::string_view(item).substr(0, dash));
      b.hi = number(std::string_view(item).substr(dash + 1));
    } else {
      b.lo = number(item);
      b.hi = b.lo;
    }
    out.push_back(b);
  }
  validate_buckets(out);
  return out;
}

std::vector<BucketRow> harness_varying_history(const Evaluation& evaluation, const std::vector<HistoryBucket>& buckets) {
  validate_buckets(buckets);
  std::vector<BucketRow> out;
  for (const auto& b : buckets) {
    std::vector<int> preds, labels;
    for (const auto& s : evaluation.instances) {
      if (s.history_size < b.lo || (b.hi && s.history_size > *b.hi)) continue;
      preds.push_back(s.prediction);
      labels.push_back(s.label);
    }
    BucketRow row{b, labels.size(), std::nullopt};
    if (!labels.empty()) row.f1 = prf1(preds, labels).f1;
    out.push_back(row);
  }
  return out;
}

nlohmann::json buckets_to_json(const std::vector<BucketRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) out.push_back({{"bucket", r.bucket.label()}, {"count", r.count}, {"f1", optional_json(r.f1)}});
  return out;
}

std::string format_buckets(const std::vector<BucketRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"History", "Count", "F1"});
  for (const auto& r : rows) cells.push_back({r.bucket.label(), std::to_string(r.count), r.f1 ? percent(*r.f1) : "-"});
  return align_table(cells);
}

std::vector<std::pair<std::string, ModelConfig>> ablation_variants(const ModelConfig& base) {
  ModelConfig no_sml = base;
  no_sml.use_structure_layer = false;
  ModelConfig no_meta = base;
  no_meta.use_aux_meta = false;
  ModelConfig no_history = base;
  no_history.interaction = InteractionKind::none;
  return {{display_name(base), base}, {"W/O SML", no_sml}, {"W/O Meta", no_meta}, {"W/O History", no_history}};
}

nlohmann::json AblationReport::to_json() const {
  nlohmann::json hashes = nlohmann::json::array();
  for (auto h : row_split_hashes) hashes.push_back(hex64(h));
  return {{"split_hash", hex64(split_hash)}, {"row_split_hashes", hashes}, {"rows", rows_to_json(rows)}};
}

AblationReport run_ablation(const Corpus& corpus, const ModelConfig& base, const ExperimentOptions& options) {
  AblationReport report;
  for (const auto& [name, cfg] : ablation_variants(base)) {
    const Experiment ex = prepare_experiment(corpus, cfg, 1, options);
    if (ex.instances.test.empty()) throw ProtocolError("empty test set");
    TrainedModel tm = fit(ex, cfg, options);
    const Evaluation ev = evaluate(tm.model, ex.vocab, ex.instances.test, tm.model.config().threshold);
    report.rows.push_back({name, ev.metrics, tm.model.parameters().scalar_count()});
    report.row_split_hashes.push_back(ex.split.hash());
  }
  report.split_hash = report.row_split_hashes.front();
  return report;
}

}  // namespace reentry
