#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "reentry/checkpoint.hpp"
#include "reentry/corpus.hpp"
#include "reentry/encoders.hpp"
#include "reentry/errors.hpp"
#include "reentry/evaluation.hpp"
#include "reentry/synthetic.hpp"

#ifndef REENTRY_VERSION
#define REENTRY_VERSION "unknown"
#endif

namespace reentry::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string version() { return REENTRY_VERSION; }

Environment process_environment() {
  Environment env;
  env.in = &std::cin;
  env.out = &std::cout;
  env.err = &std::cerr;
  env.getenv = [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
  return env;
}

json RunManifest::to_json() const {
  json outs = json::array();
  for (const auto& o : outputs) outs.push_back({{"flag", o.flag}, {"relative", o.relative}, {"hash", o.hash}});
  return {{"format", 1},       {"command", command},         {"args", args},   {"config", config},
          {"seed", seed},      {"corpus_hash", corpus_hash}, {"split_hash", split_hash},
          {"version", version}, {"timings", timings},         {"outputs", outs}};
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.args = j.at("args").get<std::vector<std::string>>();
  m.config = j.value("config", json::object());
  m.seed = j.at("seed").get<std::uint64_t>();
  m.corpus_hash = j.value("corpus_hash", "");
  m.split_hash = j.value("split_hash", "");
  m.version = j.value("version", "");
  m.timings = j.value("timings", json::object());
  for (const auto& o : j.at("outputs")) {
    m.outputs.push_back({o.at("flag").get<std::string>(), o.at("relative").get<std::string>(), o.at("hash").get<std::string>()});
  }
  return m;
}

namespace {

using Clock = std::chrono::steady_clock;

class Timer {
 public:
  void mark(const std::string& phase) {
    const auto now = Clock::now();
    phases_[phase] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }
  json to_json() const {
    json j = phases_;
    j["total_seconds"] = std::chrono::duration<double>(Clock::now() - start_).count();
    return j;
  }

 private:
  Clock::time_point start_ = Clock::now();
  Clock::time_point last_ = start_;
  json phases_ = json::object();
};

// Output locations per command: flags naming directories and flags naming files.
struct OutputFlags {
  std::vector<std::string> dirs;
  std::vector<std::string> files;
};

const std::map<std::string, OutputFlags>& output_flags() {
  static const std::map<std::string, OutputFlags> flags = {
      {"gen-data", {{}, {"--out", "--manifest"}}},
      {"train", {{"--out-dir"}, {}}},
      {"evaluate", {{"--out-dir", "--dump-attention"}, {}}},
      {"ablation", {{"--out-dir"}, {}}},
      {"k-reentry", {{"--out-dir"}, {}}},
  };
  return flags;
}

struct Context {
  const Environment& env;
  std::vector<std::string> args;  // after the subcommand name
  std::ostream& out() const { return *env.out; }
  std::ostream& err() const { return *env.err; }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

OutputRecord record_output(const std::string& flag, const fs::path& base, const fs::path& file) {
  const std::string relative = file == base ? std::string() : fs::relative(file, base).generic_string();
  return {flag, relative, hex64(file_hash(file))};
}

std::uint64_t resolve_seed(const Context& ctx, std::uint64_t flag_seed) {
  if (!ctx.env.getenv) return flag_seed;
  const auto v = ctx.env.getenv("REENTRY_SEED");
  if (!v || v->empty()) return flag_seed;
  try {
    std::size_t used = 0;
    const unsigned long long seed = std::stoull(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return seed;
  } catch (const std::exception&) {
    throw UsageError("REENTRY_SEED must be a non-negative integer, got '" + *v + "'");
  }
}

// Flags shared by every command that builds a model.
struct ModelFlags {
  bool toy = false;
  std::string encoder, interaction;
  std::size_t d_emb = 0, d_hidden = 0, cnn_maps = 0, hops = 0, batch_size = 0;
  std::size_t max_turns = 0, max_tokens = 0, max_history = 0;
  double lambda = 0, mu = 0, lr = 0, threshold = 0, clip_norm = 0;
  int epochs = 0, patience = 0, min_count = 0;
  bool no_clip = false, no_structure = false, no_meta = false, tie_encoders = false;
  std::vector<double> lr_grid;
  std::uint64_t seed = 1;
  int k = 1;
  std::size_t max_instances = 0;
  std::string embeddings;
  bool quiet = false;

  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* app, bool allow_grid) {
    opts["toy"] = app->add_flag("--toy", toy, "Small preset (d_emb=16, d_hidden=16) for quick runs");
    opts["encoder"] = app->add_option("--encoder", encoder, "Turn encoder: avg | cnn | bilstm");
    opts["interaction"] = app->add_option("--interaction", interaction, "Interaction: con | att | mem | bia | none");
    opts["d-emb"] = app->add_option("--d-emb", d_emb, "Embedding size")->check(CLI::PositiveNumber);
    opts["d-hidden"] = app->add_option("--d-hidden", d_hidden, "BiLSTM size, both directions together")->check(CLI::PositiveNumber);
    opts["cnn-maps"] = app->add_option("--cnn-maps", cnn_maps, "Feature maps per CNN window")->check(CLI::PositiveNumber);
    opts["hops"] = app->add_option("--hops", hops, "Memory-network hops (mem only)")->check(CLI::PositiveNumber);
    opts["lambda"] = app->add_option("--lambda", lambda, "Loss weight on positive instances")->check(CLI::PositiveNumber);
    opts["mu"] = app->add_option("--mu", mu, "Loss weight on negative instances")->check(CLI::PositiveNumber);
    opts["lr"] = app->add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
    if (allow_grid) {
      opts["lr-grid"] = app->add_option("--lr-grid", lr_grid, "Select lr on dev; bare flag uses 1e-3,1e-4,1e-5")
                            ->expected(0, CLI::detail::expected_max_vector_size)
                            ->delimiter(',');
    }
    opts["batch-size"] = app->add_option("--batch-size", batch_size, "Instances per batch")->check(CLI::PositiveNumber);
    opts["threshold"] = app->add_option("--threshold", threshold, "Decision threshold")->check(CLI::Range(0.0, 1.0));
    opts["epochs"] = app->add_option("--epochs", epochs, "Maximum epochs")->check(CLI::PositiveNumber);
    opts["patience"] = app->add_option("--patience", patience, "Epochs without dev-F1 gain before stopping")->check(CLI::NonNegativeNumber);
    opts["clip-norm"] = app->add_option("--clip-norm", clip_norm, "Global gradient-norm clip")->check(CLI::PositiveNumber);
    opts["no-clip"] = app->add_flag("--no-clip", no_clip, "Disable gradient clipping");
    opts["no-structure"] = app->add_flag("--no-structure", no_structure, "Drop the structure BiLSTM");
    opts["no-meta"] = app->add_flag("--no-meta", no_meta, "Drop the turn meta features");
    opts["tie-encoders"] = app->add_flag("--tie-encoders", tie_encoders, "Share the turn encoder with the history");
    opts["min-count"] = app->add_option("--min-count", min_count, "Vocabulary count cutoff")->check(CLI::PositiveNumber);
    opts["max-turns"] = app->add_option("--max-turns", max_turns, "Context turns kept")->check(CLI::PositiveNumber);
    opts["max-tokens"] = app->add_option("--max-tokens", max_tokens, "Tokens kept per turn or message")->check(CLI::PositiveNumber);
    opts["max-history"] = app->add_option("--max-history", max_history, "History messages kept")->check(CLI::PositiveNumber);
    opts["seed"] = app->add_option("--seed", seed, "Seed for splits, initialization and shuffling");
    opts["k"] = app->add_option("--k", k, "Entry order to predict after")->check(CLI::Range(1, 1000));
    opts["max-instances"] = app->add_option("--max-instances", max_instances, "Keep the first n instances (0 = all)");
    opts["embeddings"] = app->add_option("--embeddings", embeddings, "Pretrained vectors, one 'token v1 .. vd' per line")
                             ->check(CLI::ExistingFile);
    opts["quiet"] = app->add_flag("--quiet", quiet, "No per-epoch progress");
  }

  bool given(const std::string& name) const {
    auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }

  ModelConfig resolve(const Context& ctx) const {
    ModelConfig c = toy ? ModelConfig::toy() : ModelConfig::standard();
    try {
      if (given("encoder")) c.encoder = parse_encoder(encoder);
      if (given("interaction")) c.interaction = parse_interaction(interaction);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    if (given("hops") && c.interaction != InteractionKind::memnet) {
      throw UsageError("--hops applies only to --interaction mem");
    }
    if (given("lr") && given("lr-grid")) throw UsageError("--lr and --lr-grid are exclusive");
    if (given("clip-norm") && no_clip) throw UsageError("--clip-norm and --no-clip are exclusive");
    if (given("d-emb")) c.d_emb = d_emb;
    if (given("d-hidden")) c.d_hidden = d_hidden;
    if (given("cnn-maps")) c.cnn_maps = cnn_maps;
    if (given("hops")) c.hops = hops;
    if (given("lambda")) c.lambda = lambda;
    if (given("mu")) c.mu = mu;
    if (given("lr")) c.lr = lr;
    if (given("batch-size")) c.batch_size = batch_size;
    if (given("threshold")) c.threshold = threshold;
    if (given("epochs")) c.max_epochs = epochs;
    if (given("patience")) c.patience = patience;
    if (given("clip-norm")) c.clip_norm = clip_norm;
    if (no_clip) c.clip_norm = 0.0;
    if (no_structure) c.use_structure_layer = false;
    if (no_meta) c.use_aux_meta = false;
    if (tie_encoders) c.tie_encoders = true;
    if (given("min-count")) c.min_count = min_count;
    if (given("max-turns")) c.limits.max_turns = max_turns;
    if (given("max-tokens")) c.limits.max_tokens = max_tokens;
    if (given("max-history")) c.limits.max_history = max_history;
    c.seed = resolve_seed(ctx, seed);
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }

  std::vector<double> grid() const {
    if (!given("lr-grid")) return {};
    return lr_grid.empty() ? kDefaultLrGrid : lr_grid;
  }

  ExperimentOptions experiment_options(const Context& ctx) const {
    ExperimentOptions o;
    o.lr_grid = grid();
    o.max_instances = max_instances;
    if (!quiet) {
      std::ostream* err = ctx.env.err;
      o.train.on_epoch = [err](const EpochRecord& r) {
        *err << "epoch " << r.epoch << "  loss " << r.train_loss << "  dev F1 " << r.dev_f1;
        if (r.dev_auc) *err << "  dev AUC " << *r.dev_auc;
        *err << '\n';
      };
    }
    return o;
  }
};

Corpus load_corpus(const std::string& path) {
  try {
    return parse_corpus(fs::path(path));
  } catch (const ParseError& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::vector<std::string> parse_args_reversed(const std::vector<std::string>& args) {
  return {args.rbegin(), args.rend()};
}

// Runs a parsed subcommand body, mapping CLI11 outcomes to exit codes.
int parse_or_exit(CLI::App& app, const Context& ctx) {
  try {
    auto reversed = parse_args_reversed(ctx.args);
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, ctx.out(), ctx.err());
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, ctx.out(), ctx.err());
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, ctx.out(), ctx.err());
    return kExitUsage;
  }
  return -1;
}

// ---------------------------------------------------------------- gen-data

int cmd_gen_data(const Context& ctx) {
  CLI::App app("Write a synthetic conversation corpus", "reentry gen-data");
  app.set_config("--config", "", "TOML file whose keys mirror the flags");
  SyntheticConfig sc;
  std::string out_path, manifest_path;
  app.add_option("--out", out_path, "Corpus file to write (JSONL)")->required();
  app.add_option("--manifest", manifest_path, "Manifest path (default: <out>.manifest.json)");
  app.add_option("--users", sc.n_users, "Number of users");
  app.add_option("--convs", sc.n_convs, "Number of conversations");
  app.add_option("--topics", sc.n_topics, "Number of topics");
  app.add_option("--affinity", sc.reentry_affinity, "How strongly topical overlap drives re-entry, in [0,1]");
  app.add_option("--topics-per-user", sc.topics_per_user, "Interest topics per user");
  app.add_option("--max-entries", sc.max_entries, "Most entries one user makes in a conversation");
  app.add_option("--seed", sc.seed, "Generator seed");
  if (int code = parse_or_exit(app, ctx); code >= 0) return code;

  Timer timer;
  sc.seed = resolve_seed(ctx, sc.seed);
  try {
    validate(sc);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("validation error: ") + e.what());
  }
  const auto conversations = generate_synthetic(sc);
  timer.mark("generate");
  {
    std::ostringstream buf;
    write_corpus(buf, conversations);
    write_text(out_path, buf.str());
  }
  timer.mark("write");
  if (manifest_path.empty()) manifest_path = out_path + ".manifest.json";

  RunManifest m;
  m.command = "gen-data";
  m.args = ctx.args;
  m.config = {{"users", sc.n_users},      {"convs", sc.n_convs},
              {"topics", sc.n_topics},    {"affinity", sc.reentry_affinity},
              {"topics_per_user", sc.topics_per_user}, {"max_entries", sc.max_entries}};
  m.seed = sc.seed;
  m.corpus_hash = hex64(file_hash(out_path));
  m.version = version();
  m.outputs.push_back(record_output("--out", fs::path(out_path), fs::path(out_path)));
  m.timings = timer.to_json();
  write_json(manifest_path, m.to_json());
  ctx.out() << "wrote " << conversations.size() << " conversations to " << out_path << " (corpus hash "
            << m.corpus_hash << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

json split_summary(const Experiment& ex) {
  return {{"k", ex.k},
          {"split_hash", hex64(ex.split.hash())},
          {"train", ex.instances.train.size()},
          {"dev", ex.instances.dev.size()},
          {"test", ex.instances.test.size()},
          {"vocabulary", ex.vocab.size()}};
}

ModelInit embedding_init(const std::string& path, const Vocabulary& vocab, std::ostream& err, bool quiet) {
  if (path.empty()) return {};
  return [path, &vocab, &err, quiet](Model& model) {
    ad::Tensor table = model.embedding();
    const std::size_t n = load_pretrained_embeddings(path, vocab, table);
    if (!quiet) err << "loaded " << n << " pretrained vectors from " << path << '\n';
  };
}

int cmd_train(const Context& ctx) {
  CLI::App app("Train a re-entry model", "reentry train");
  app.set_config("--config", "", "TOML file whose keys mirror the flags");
  ModelFlags flags;
  std::string corpus_path, out_dir;
  app.add_option("--corpus", corpus_path, "Corpus file (JSONL)")->required()->check(CLI::ExistingFile);
  app.add_option("--out-dir", out_dir, "Directory for checkpoint, history, report and manifest")->required();
  flags.add(&app, true);
  if (int code = parse_or_exit(app, ctx); code >= 0) return code;

  Timer timer;
  const ModelConfig config = flags.resolve(ctx);
  const Corpus corpus = load_corpus(corpus_path);
  timer.mark("load");
  ExperimentOptions options = flags.experiment_options(ctx);
  const Experiment ex = prepare_experiment(corpus, config, flags.k, options);
  options.init = embedding_init(flags.embeddings, ex.vocab, ctx.err(), flags.quiet);
  timer.mark("prepare");
  TrainedModel tm = fit(ex, config, options);
  timer.mark("train");

  const fs::path dir = out_dir;
  fs::create_directories(dir);
  const std::string corpus_hash = hex64(file_hash(corpus_path));
  const json meta = {{"k", flags.k},
                     {"max_instances", flags.max_instances},
                     {"corpus_hash", corpus_hash},
                     {"split_hash", hex64(ex.split.hash())}};
  save_checkpoint(dir / "checkpoint.json", tm.model, ex.vocab, meta);

  json history = json::array();
  for (const auto& r : tm.history) history.push_back(r.to_json());
  json history_doc = {{"epochs", history}};
  if (tm.grid) history_doc["grid"] = tm.grid->to_json();
  write_json(dir / "history.json", history_doc);

  std::vector<ReportRow> rows;
  if (!ex.instances.test.empty()) {
    const Evaluation ev = evaluate(tm.model, ex.vocab, ex.instances.test, tm.model.config().threshold);
    rows.push_back({display_name(tm.model.config()), ev.metrics, tm.model.parameters().scalar_count()});
  }
  timer.mark("evaluate");
  write_json(dir / "report.json",
             {{"config", to_json(tm.model.config())}, {"split", split_summary(ex)}, {"test", rows_to_json(rows)}});
  write_text(dir / "report.txt", format_table(rows));

  RunManifest m;
  m.command = "train";
  m.args = ctx.args;
  m.config = to_json(tm.model.config());
  m.seed = config.seed;
  m.corpus_hash = corpus_hash;
  m.split_hash = hex64(ex.split.hash());
  m.version = version();
  for (const char* f : {"checkpoint.json", "history.json", "report.json", "report.txt"}) {
    m.outputs.push_back(record_output("--out-dir", dir, dir / f));
  }
  m.timings = timer.to_json();
  write_json(dir / "manifest.json", m.to_json());
  ctx.out() << format_table(rows);
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

std::string safe_name(const std::string& s) {
  std::string out;
  for (char ch : s) out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_') ? ch : '_';
  return out;
}

int cmd_evaluate(const Context& ctx) {
  CLI::App app("Score a checkpoint on a corpus split", "reentry evaluate");
  app.set_config("--config", "", "TOML file whose keys mirror the flags");
  std::string checkpoint_path, corpus_path, out_dir, attention_dir, buckets_spec, split_name = "test";
  int k = 0;
  bool with_baselines = false;
  std::uint64_t seed = 0;
  app.add_option("--checkpoint", checkpoint_path, "Checkpoint written by train")->required()->check(CLI::ExistingFile);
  app.add_option("--corpus", corpus_path, "Corpus file (JSONL)")->required()->check(CLI::ExistingFile);
  app.add_option("--k", k, "Entry order (default: the one trained on)")->check(CLI::Range(1, 1000));
  app.add_option("--split", split_name, "Which split to score")->check(CLI::IsMember({"train", "dev", "test"}));
  app.add_flag("--baselines", with_baselines, "Append Random, History and All-Yes rows");
  app.add_option("--dump-attention", attention_dir, "Write one attention-trace JSON per instance here");
  app.add_option("--history-buckets", buckets_spec, "F1 per history length, e.g. 0,1-5,6+");
  app.add_option("--out-dir", out_dir, "Directory for report, per-instance scores and manifest");
  auto* seed_opt = app.add_option("--seed", seed, "Baseline seed (default: the training seed)");
  if (int code = parse_or_exit(app, ctx); code >= 0) return code;

  Timer timer;
  std::vector<HistoryBucket> buckets;
  if (!buckets_spec.empty()) {
    try {
      buckets = parse_buckets(buckets_spec);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const Corpus corpus = load_corpus(corpus_path);
  const ModelConfig& config = ckpt.model.config();
  if (k == 0) k = ckpt.metadata.value("k", 1);
  ExperimentOptions options;
  options.max_instances = ckpt.metadata.value("max_instances", std::size_t{0});
  const std::uint64_t baseline_seed = resolve_seed(ctx, seed_opt->count() > 0 ? seed : config.seed);
  const Experiment ex = prepare_experiment(corpus, config, k, options);
  if (ex.vocab.hash() != ckpt.vocabulary.hash()) {
    throw LoadError("vocabulary hash mismatch: checkpoint " + hex64(ckpt.vocabulary.hash()) + ", corpus training split " +
                    hex64(ex.vocab.hash()));
  }
  timer.mark("load");

  const std::vector<Instance>& instances = split_name == "train" ? ex.instances.train
                                           : split_name == "dev"  ? ex.instances.dev
                                                                  : ex.instances.test;
  if (instances.empty()) throw ProtocolError("the " + split_name + " split has no instance at k=" + std::to_string(k));
  const Evaluation ev = evaluate(ckpt.model, ckpt.vocabulary, instances, config.threshold, !attention_dir.empty());
  std::vector<ReportRow> rows = {{display_name(config), ev.metrics, std::nullopt}};
  if (with_baselines) {
    const ParticipationIndex index(corpus);
    const double t = tune_history_threshold(ex.instances.dev, index, baseline_seed);
    rows.push_back({"Random", evaluate_baseline(baseline_random(instances.size(), baseline_seed), instances).metrics, std::nullopt});
    rows.push_back({"History", evaluate_baseline(baseline_history(instances, index, t, baseline_seed), instances).metrics, std::nullopt});
    rows.push_back({"All-Yes", evaluate_baseline(baseline_allyes(instances.size()), instances).metrics, std::nullopt});
  }
  std::string text = format_table(rows);
  json report = {{"k", k}, {"split", split_name}, {"count", instances.size()}, {"rows", rows_to_json(rows)}};
  if (!buckets.empty()) {
    const auto bucket_rows = harness_varying_history(ev, buckets);
    report["history_buckets"] = buckets_to_json(bucket_rows);
    text += "\n" + format_buckets(bucket_rows);
  }
  timer.mark("evaluate");

  std::vector<OutputRecord> outputs;
  if (!attention_dir.empty()) {
    const fs::path adir = attention_dir;
    fs::create_directories(adir);
    for (std::size_t i = 0; i < ev.instances.size(); ++i) {
      const auto& s = ev.instances[i];
      char prefix[16];
      std::snprintf(prefix, sizeof prefix, "%05zu", i);
      const fs::path file = adir / (std::string(prefix) + "_" + safe_name(s.conversation_id) + "_" + safe_name(s.target_user) + ".json");
      write_json(file, {{"conversation_id", s.conversation_id},
                        {"target_user", s.target_user},
                        {"label", s.label},
                        {"score", s.score},
                        {"trace", ev.traces[i].to_json()}});
      outputs.push_back(record_output("--dump-attention", adir, file));
    }
  }
  if (!out_dir.empty()) {
    const fs::path dir = out_dir;
    write_json(dir / "report.json", report);
    write_text(dir / "report.txt", text);
    write_json(dir / "instances.json", ev.dump());
    for (const char* f : {"report.json", "report.txt", "instances.json"}) outputs.push_back(record_output("--out-dir", dir, dir / f));
    RunManifest m;
    m.command = "evaluate";
    m.args = ctx.args;
    m.config = to_json(config);
    m.seed = baseline_seed;
    m.corpus_hash = hex64(file_hash(corpus_path));
    m.split_hash = hex64(ex.split.hash());
    m.version = version();
    m.outputs = outputs;
    m.timings = timer.to_json();
    write_json(dir / "manifest.json", m.to_json());
  }
  ctx.out() << text;
  return kExitOk;
}

// ---------------------------------------------------------------- predict

Instance instance_from_json(const json& obj, const Corpus* corpus, int k) {
  const std::string conv_id = obj.at("conversation_id").get<std::string>();
  const std::string user = obj.at("target_user").get<std::string>();
  if (!obj.contains("context")) {
    if (!corpus) throw std::invalid_argument("line has no 'context' and no --corpus was given");
    auto inst = instance_for(*corpus, conv_id, user, k);
    if (!inst) throw std::invalid_argument("no entry " + std::to_string(k) + " of '" + user + "' in '" + conv_id + "'");
    return *inst;
  }
  Instance inst;
  inst.conversation_id = conv_id;
  inst.target_user = user;
  inst.entry_order = k;
  inst.context = conversation_from_json({{"id", conv_id}, {"turns", obj.at("context")}}).turns;
  if (inst.context.empty()) throw std::invalid_argument("empty context");
  if (auto h = obj.find("history"); h != obj.end()) {
    for (const auto& msg : *h) {
      Message m;
      m.author = user;
      m.tokens = msg.is_array() ? msg.get<std::vector<std::string>>() : msg.at("tokens").get<std::vector<std::string>>();
      inst.history.push_back(std::move(m));
    }
  }
  return inst;
}

int cmd_predict(const Context& ctx) {
  CLI::App app("Score (conversation, user) pairs read as JSON lines from stdin", "reentry predict");
  app.set_config("--config", "", "TOML file whose keys mirror the flags");
  std::string checkpoint_path, corpus_path;
  int k = 1;
  app.add_option("--checkpoint", checkpoint_path, "Checkpoint written by train")->required()->check(CLI::ExistingFile);
  app.add_option("--corpus", corpus_path, "Corpus for lines that name a conversation without its turns")->check(CLI::ExistingFile);
  app.add_option("--k", k, "Entry order for corpus lookups")->check(CLI::Range(1, 1000));
  if (int code = parse_or_exit(app, ctx); code >= 0) return code;

  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  std::optional<Corpus> corpus;
  if (!corpus_path.empty()) corpus = load_corpus(corpus_path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(*ctx.env.in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char ch) { return std::isspace(ch); })) continue;
    try {
      const json obj = json::parse(line);
      const Instance inst = instance_from_json(obj, corpus ? &*corpus : nullptr, k);
      const double p = ckpt.model.probability(prepare_input(inst, ckpt.vocabulary, ckpt.model.config().limits));
      ctx.out() << json{{"conversation_id", inst.conversation_id}, {"target_user", inst.target_user}, {"p", p}}.dump()
                << '\n';
    } catch (const std::exception& e) {
      ctx.err() << "line " << line_no << ": " << e.what() << '\n';
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------- ablation / k-reentry

int cmd_ablation(const Context& ctx) {
  CLI::App app("Train the full model and its three ablations on one split", "reentry ablation");
  app.set_config("--config", "", "TOML file whose keys mirror the flags");
  ModelFlags flags;
  std::string corpus_path, out_dir;
  app.add_option("--corpus", corpus_path, "Corpus file (JSONL)")->required()->check(CLI::ExistingFile);
  app.add_option("--out-dir", out_dir, "Directory for report and manifest")->required();
  flags.add(&app, true);
  if (int code = parse_or_exit(app, ctx); code >= 0) return code;
  if (flags.given("k") && flags.k != 1) throw UsageError("ablation runs at k=1");
  if (flags.given("embeddings")) throw UsageError("--embeddings is supported by train only");

  Timer timer;
  const ModelConfig config = flags.resolve(ctx);
  const Corpus corpus = load_corpus(corpus_path);
  ExperimentOptions options = flags.experiment_options(ctx);
  const AblationReport report = run_ablation(corpus, config, options);
  timer.mark("run");

  const fs::path dir = out_dir;
  write_json(dir / "report.json", {{"config", to_json(config)}, {"ablation", report.to_json()}});
  write_text(dir / "report.txt", format_table(report.rows));
  RunManifest m;
  m.command = "ablation";
  m.args = ctx.args;
  m.config = to_json(config);
  m.seed = config.seed;
  m.corpus_hash = hex64(file_hash(corpus_path));
  m.split_hash = hex64(report.split_hash);
  m.version = version();
  for (const char* f : {"report.json", "report.txt"}) m.outputs.push_back(record_output("--out-dir", dir, dir / f));
  m.timings = timer.to_json();
  write_json(dir / "manifest.json", m.to_json());
  ctx.out() << format_table(report.rows);
  return kExitOk;
}

int cmd_k_reentry(const Context& ctx) {
  CLI::App app("Predict the first, second and third re-entries", "reentry k-reentry");
  app.set_config("--config", "", "TOML file whose keys mirror the flags");
  ModelFlags flags;
  std::string corpus_path, out_dir;
  std::vector<int> ks = {1, 2, 3};
  bool reuse = false;
  app.add_option("--corpus", corpus_path, "Corpus file (JSONL)")->required()->check(CLI::ExistingFile);
  app.add_option("--out-dir", out_dir, "Directory for report and manifest")->required();
  app.add_option("--ks", ks, "Entry orders to score")->delimiter(',')->check(CLI::Range(1, 1000));
  app.add_flag("--reuse-model", reuse, "Score every k with the model trained at the first k");
  flags.add(&app, true);
  if (int code = parse_or_exit(app, ctx); code >= 0) return code;
  if (flags.given("k")) throw UsageError("use --ks with k-reentry");
  if (flags.given("embeddings")) throw UsageError("--embeddings is supported by train only");

  Timer timer;
  const ModelConfig config = flags.resolve(ctx);
  const Corpus corpus = load_corpus(corpus_path);
  ExperimentOptions options = flags.experiment_options(ctx);
  options.retrain_per_k = !reuse;
  const auto rows = harness_k_reentry(corpus, config, ks, options);
  timer.mark("run");

  const fs::path dir = out_dir;
  write_json(dir / "report.json", {{"config", to_json(config)}, {"retrain_per_k", !reuse}, {"k_reentry", k_reentry_to_json(rows)}});
  write_text(dir / "report.txt", format_k_reentry(rows));
  RunManifest m;
  m.command = "k-reentry";
  m.args = ctx.args;
  m.config = to_json(config);
  m.seed = config.seed;
  m.corpus_hash = hex64(file_hash(corpus_path));
  m.split_hash = hex64(split_conversations(conversation_ids(corpus), config.split_ratios, config.seed).hash());
  m.version = version();
  for (const char* f : {"report.json", "report.txt"}) m.outputs.push_back(record_output("--out-dir", dir, dir / f));
  m.timings = timer.to_json();
  write_json(dir / "manifest.json", m.to_json());
  ctx.out() << format_k_reentry(rows);
  return kExitOk;
}

// ---------------------------------------------------------------- replay

// Splits "--flag=value" and returns the flag name.
std::string flag_name(const std::string& token) {
  const auto eq = token.find('=');
  return eq == std::string::npos ? token : token.substr(0, eq);
}

std::optional<std::string> flag_value(const std::vector<std::string>& args, const std::string& flag) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == flag && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind(flag + "=", 0) == 0) return args[i].substr(flag.size() + 1);
  }
  return std::nullopt;
}

fs::path replay_base(const fs::path& root, const std::string& flag) { return root / flag.substr(2); }

// Same arguments with every output location moved below `root` and the seed pinned.
std::vector<std::string> replay_args(const RunManifest& m, const fs::path& root) {
  const auto& flags = output_flags().at(m.command);
  auto is_output = [&](const std::string& f) {
    return std::find(flags.dirs.begin(), flags.dirs.end(), f) != flags.dirs.end() ||
           std::find(flags.files.begin(), flags.files.end(), f) != flags.files.end();
  };
  auto relocate = [&](const std::string& f, const std::string& v) {
    const bool is_dir = std::find(flags.dirs.begin(), flags.dirs.end(), f) != flags.dirs.end();
    return (is_dir ? replay_base(root, f) : replay_base(root, f) / fs::path(v).filename()).string();
  };
  std::vector<std::string> out;
  for (std::size_t i = 0; i < m.args.size(); ++i) {
    const std::string& a = m.args[i];
    const std::string f = flag_name(a);
    if (f == "--seed") {
      if (a.find('=') == std::string::npos) ++i;
      continue;
    }
    if (is_output(f)) {
      if (a.find('=') != std::string::npos) {
        out.push_back(f + "=" + relocate(f, a.substr(f.size() + 1)));
      } else if (i + 1 < m.args.size()) {
        out.push_back(f);
        out.push_back(relocate(f, m.args[++i]));
      }
      continue;
    }
    out.push_back(a);
  }
  out.push_back("--seed");
  out.push_back(std::to_string(m.seed));
  return out;
}

fs::path replay_output_path(const RunManifest& m, const fs::path& root, const OutputRecord& o) {
  const auto& flags = output_flags().at(m.command);
  const bool is_dir = std::find(flags.dirs.begin(), flags.dirs.end(), o.flag) != flags.dirs.end();
  if (is_dir) return replay_base(root, o.flag) / o.relative;
  const auto original = flag_value(m.args, o.flag);
  return replay_base(root, o.flag) / fs::path(original.value_or("output")).filename();
}

int dispatch(const std::string& command, const Context& ctx);

int cmd_replay(const Context& ctx) {
  CLI::App app("Re-run a command from its manifest and compare every output", "reentry replay");
  std::string manifest_path, out_dir;
  app.add_option("--manifest", manifest_path, "Manifest written by an earlier run")->required()->check(CLI::ExistingFile);
  app.add_option("--out-dir", out_dir, "Directory for the re-run outputs")->required();
  if (int code = parse_or_exit(app, ctx); code >= 0) return code;

  std::ifstream in(manifest_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw LoadError("manifest " + manifest_path + " is not valid JSON: " + e.what());
  }
  const RunManifest m = RunManifest::from_json(j);
  if (!output_flags().contains(m.command)) throw ProtocolError("command '" + m.command + "' cannot be replayed");
  if (m.version != version()) {
    ctx.err() << "note: manifest written by " << m.version << ", replaying with " << version() << '\n';
  }
  if (auto corpus = flag_value(m.args, "--corpus"); corpus && !m.corpus_hash.empty()) {
    const std::string now = hex64(file_hash(*corpus));
    if (now != m.corpus_hash) throw LoadError("corpus " + *corpus + " changed since the run (" + now + " vs " + m.corpus_hash + ")");
  }

  const fs::path root = out_dir;
  Environment inner = ctx.env;
  inner.getenv = nullptr;  // the manifest seed wins over REENTRY_SEED
  std::ostringstream sink_out, sink_err;
  inner.out = &sink_out;
  inner.err = &sink_err;
  const Context sub{inner, replay_args(m, root)};
  const int code = dispatch(m.command, sub);
  if (code != kExitOk) {
    ctx.err() << sink_err.str();
    ctx.err() << "replayed command exited with " << code << '\n';
    return kExitFailure;
  }

  std::size_t mismatches = 0;
  for (const auto& o : m.outputs) {
    const fs::path path = replay_output_path(m, root, o);
    const std::string now = fs::exists(path) ? hex64(file_hash(path)) : std::string("missing");
    const bool same = now == o.hash;
    if (!same) ++mismatches;
    ctx.out() << (same ? "match     " : "MISMATCH  ") << o.flag << (o.relative.empty() ? "" : "/" + o.relative) << "  "
              << now << '\n';
  }
  ctx.out() << (mismatches == 0 ? "all " + std::to_string(m.outputs.size()) + " outputs reproduced bitwise\n"
                                : std::to_string(mismatches) + " output(s) differ\n");
  return mismatches == 0 ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------- dispatch

const char* kUsage =
    "usage: reentry <command> [flags]\n"
    "\n"
    "commands:\n"
    "  gen-data    write a synthetic corpus\n"
    "  train       train a model and write a checkpoint\n"
    "  evaluate    score a checkpoint, optionally with baselines and traces\n"
    "  predict     score JSON lines from stdin\n"
    "  ablation    full model against W/O SML, W/O Meta and W/O History\n"
    "  k-reentry   first, second and third re-entry protocol\n"
    "  replay      re-run a command from its manifest and compare outputs\n"
    "\n"
    "Run 'reentry <command> --help' for the flags of one command.\n";

int dispatch(const std::string& command, const Context& ctx) {
  if (command == "gen-data") return cmd_gen_data(ctx);
  if (command == "train") return cmd_train(ctx);
  if (command == "evaluate") return cmd_evaluate(ctx);
  if (command == "predict") return cmd_predict(ctx);
  if (command == "ablation") return cmd_ablation(ctx);
  if (command == "k-reentry") return cmd_k_reentry(ctx);
  if (command == "replay") return cmd_replay(ctx);
  throw UsageError("unknown command '" + command + "'");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, const Environment& env) {
  std::ostream& err = *env.err;
  if (args.empty()) {
    err << kUsage;
    return kExitUsage;
  }
  const std::string& command = args.front();
  if (command == "--help" || command == "-h" || command == "help") {
    *env.out << kUsage;
    return kExitOk;
  }
  if (command == "--version") {
    *env.out << "reentry " << version() << '\n';
    return kExitOk;
  }
  const Context ctx{env, std::vector<std::string>(args.begin() + 1, args.end())};
  try {
    return dispatch(command, ctx);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    if (!output_flags().contains(command) && command != "predict" && command != "replay") err << kUsage;
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in) {
  Environment env = process_environment();
  env.out = &out;
  env.err = &err;
  env.in = &in;
  return run_cli(args, env);
}

}  // namespace reentry::cli
