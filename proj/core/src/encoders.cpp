#include "reentry/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "reentry/errors.hpp"

namespace reentry {

using ad::Tape;
using ad::Tensor;

LstmWeights LstmWeights::create(ParameterStore& store, const std::string& prefix, std::size_t in,
                                std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  LstmWeights w;
  w.w_x = store.uniform(prefix + ".w_x", {in, 4 * hidden}, bound, rng);
  w.w_h = store.uniform(prefix + ".w_h", {hidden, 4 * hidden}, bound, rng);
  w.b = store.uniform(prefix + ".b", {1, 4 * hidden}, bound, rng);
  auto b = w.b.mutable_values();
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
  return w;
}

BiLstm BiLstm::create(ParameterStore& store, const std::string& prefix, std::size_t in,
                      std::size_t hidden_total, Rng& rng) {
  BiLstm l;
  l.forward = LstmWeights::create(store, prefix + ".fwd", in, hidden_total / 2, rng);
  l.backward = LstmWeights::create(store, prefix + ".bwd", in, hidden_total / 2, rng);
  return l;
}

namespace {

// Hidden states of one direction, indexed by time step.
std::vector<Tensor> run_direction(Tape& tape, const LstmWeights& w, const Tensor& inputs, bool reverse) {
  const std::size_t n = inputs.rows();
  const std::size_t h = w.hidden();
  const Tensor gates = ad::add(tape, ad::matmul(tape, inputs, w.w_x), w.b);
  Tensor state = Tensor::zeros({1, 2 * h});
  std::vector<Tensor> hs(n);
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    const std::size_t row[] = {t};
    state = ad::lstm_step(tape, ad::select_rows(tape, gates, row), state, w.w_h);
    hs[t] = ad::slice_cols(tape, state, 0, h);
  }
  return hs;
}

}  // namespace

BiLstmOutput BiLstm::run(Tape& tape, const Tensor& inputs) const {
  if (inputs.rows() == 0) throw EmptyPoolError("bilstm: empty sequence");
  const auto fwd = run_direction(tape, forward, inputs, false);
  const auto bwd = run_direction(tape, backward, inputs, true);
  BiLstmOutput out;
  out.states = ad::concat(tape, {ad::concat(tape, fwd, 0), ad::concat(tape, bwd, 0)}, 1);
  out.final = ad::concat(tape, {fwd.back(), bwd.front()}, 1);
  return out;
}

TurnEncoder TurnEncoder::create(ParameterStore& store, const std::string& prefix,
                                const ModelConfig& config, const Tensor& embedding, Rng& rng) {
  switch (config.encoder) {
    case EncoderKind::avg_embed:
      return average(embedding);
    case EncoderKind::cnn: {
      CnnWeights cnn;
      cnn.windows = config.cnn_windows;
      for (std::size_t w : config.cnn_windows) {
        const std::size_t fan_in = w * config.d_emb;
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        const std::string name = prefix + ".conv" + std::to_string(w);
        cnn.kernels.push_back(store.uniform(name + ".w", {fan_in, config.cnn_maps}, bound, rng));
        cnn.biases.push_back(store.uniform(name + ".b", {1, config.cnn_maps}, bound, rng));
      }
      return convolutional(embedding, std::move(cnn));
    }
    case EncoderKind::bilstm:
      return recurrent(embedding, BiLstm::create(store, prefix + ".lstm", config.d_emb, config.d_hidden, rng));
  }
  throw std::logic_error("unhandled encoder kind");
}

TurnEncoder TurnEncoder::average(Tensor embedding) {
  TurnEncoder e;
  e.kind_ = EncoderKind::avg_embed;
  e.embedding_ = std::move(embedding);
  return e;
}

TurnEncoder TurnEncoder::convolutional(Tensor embedding, CnnWeights cnn) {
  if (cnn.windows.empty() || cnn.windows.size() != cnn.kernels.size() ||
      cnn.kernels.size() != cnn.biases.size()) {
    throw ShapeError("cnn encoder: windows, kernels and biases must align");
  }
  TurnEncoder e;
  e.kind_ = EncoderKind::cnn;
  e.embedding_ = std::move(embedding);
  e.cnn_ = std::move(cnn);
  return e;
}

TurnEncoder TurnEncoder::recurrent(Tensor embedding, BiLstm lstm) {
  TurnEncoder e;
  e.kind_ = EncoderKind::bilstm;
  e.embedding_ = std::move(embedding);
  e.lstm_ = std::move(lstm);
  return e;
}

std::size_t TurnEncoder::output_dim() const {
  switch (kind_) {
    case EncoderKind::avg_embed: return embedding_.cols();
    case EncoderKind::cnn: {
      std::size_t d = 0;
      for (const auto& k : cnn_.kernels) d += k.cols();
      return d;
    }
    case EncoderKind::bilstm: return 2 * lstm_.forward.hidden();
  }
  return 0;
}

Tensor TurnEncoder::encode(Tape& tape, std::span<const int> tokens) const {
  if (tokens.empty()) throw EmptyPoolError("turn encoder: no tokens");
  const Tensor emb = ad::embedding_lookup(tape, embedding_, tokens, Vocabulary::kPad);
  switch (kind_) {
    case EncoderKind::avg_embed:
      return ad::mean_pool(tape, emb, std::vector<bool>(tokens.size(), true));
    case EncoderKind::cnn: {
      const std::size_t widest = *std::max_element(cnn_.windows.begin(), cnn_.windows.end());
      Tensor padded = emb;
      if (tokens.size() < widest) {
        padded = ad::concat(tape, {emb, Tensor::zeros({widest - tokens.size(), emb.cols()})}, 0);
      }
      std::vector<Tensor> pooled;
      for (std::size_t i = 0; i < cnn_.windows.size(); ++i) {
        const Tensor windows = ad::unfold_rows(tape, padded, cnn_.windows[i]);
        const Tensor maps = ad::tanh(tape, ad::add(tape, ad::matmul(tape, windows, cnn_.kernels[i]), cnn_.biases[i]));
        pooled.push_back(ad::max_pool_time(tape, maps));
      }
      return ad::concat(tape, pooled, 1);
    }
    case EncoderKind::bilstm:
      return lstm_.run(tape, emb).final;
  }
  throw std::logic_error("unhandled encoder kind");
}

Tensor TurnEncoder::encode(Tape& tape, std::span<const int> tokens, const std::vector<bool>& mask) const {
  if (mask.size() != tokens.size()) throw ShapeError("turn encoder: mask length differs from tokens");
  std::vector<int> kept;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (mask[i]) kept.push_back(tokens[i]);
  return encode(tape, kept);
}

StructureEncoder StructureEncoder::create(ParameterStore& store, const std::string& prefix,
                                          const ModelConfig& config, Rng& rng) {
  const std::size_t d_turn = config.turn_dim();
  if (!config.use_structure_layer) {
    Tensor projection;
    if (d_turn != config.context_dim()) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(d_turn));
      projection = store.uniform(prefix + ".projection", {d_turn, config.context_dim()}, bound, rng);
    }
    return passthrough(projection);
  }
  const std::size_t in = d_turn + (config.use_aux_meta ? 4 : 0);
  return recurrent(BiLstm::create(store, prefix + ".lstm", in, config.context_dim(), rng), config.use_aux_meta);
}

StructureEncoder StructureEncoder::recurrent(BiLstm lstm, bool use_aux) {
  StructureEncoder s;
  s.enabled_ = true;
  s.use_aux_ = use_aux;
  s.lstm_ = std::move(lstm);
  return s;
}

StructureEncoder StructureEncoder::passthrough(Tensor projection) {
  StructureEncoder s;
  s.enabled_ = false;
  s.use_aux_ = false;
  s.projection_ = std::move(projection);
  return s;
}

Tensor StructureEncoder::encode(Tape& tape, const std::vector<Tensor>& turn_reprs,
                                const std::vector<AuxEncoding>& aux) const {
  if (turn_reprs.empty()) throw ShapeError("structure encoder: no turns");
  if (turn_reprs.size() != aux.size()) throw ShapeError("structure encoder: turns and aux differ in length");
  if (!enabled_) {
    Tensor rows = ad::concat(tape, turn_reprs, 0);
    return projection_.defined() ? ad::matmul(tape, rows, projection_) : rows;
  }
  std::vector<Tensor> inputs;
  inputs.reserve(turn_reprs.size());
  for (std::size_t t = 0; t < turn_reprs.size(); ++t) {
    if (use_aux_) {
      const Tensor meta = Tensor::from({1, 4}, {aux[t].begin(), aux[t].end()});
      inputs.push_back(ad::concat(tape, {turn_reprs[t], meta}, 1));
    } else {
      inputs.push_back(turn_reprs[t]);
    }
  }
  return lstm_.run(tape, ad::concat(tape, inputs, 0)).states;
}

HistoryRepr encode_history(Tape& tape, const TurnEncoder& encoder,
                           const std::vector<std::vector<int>>& messages) {
  HistoryRepr out;
  out.dim = encoder.output_dim();
  if (messages.empty()) return out;
  std::vector<Tensor> rows;
  rows.reserve(messages.size());
  for (const auto& m : messages) rows.push_back(encoder.encode(tape, m));
  out.rows = ad::concat(tape, rows, 0);
  out.mask.assign(messages.size(), true);
  return out;
}

std::size_t load_pretrained_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                                       Tensor& embedding) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open embedding file " + path.string());
  const std::size_t d = embedding.cols();
  auto values = embedding.mutable_values();
  std::size_t loaded = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> vec;
    double v;
    while (fields >> v) vec.push_back(v);
    if (vec.size() != d) {
      throw LoadError("embedding file line " + std::to_string(line_no) + ": expected " +
                      std::to_string(d) + " values, got " + std::to_string(vec.size()));
    }
    const int id = vocab.id(token);
    if (id == Vocabulary::kUnk || id == Vocabulary::kPad) continue;
    std::copy(vec.begin(), vec.end(), values.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(id) * d));
    ++loaded;
  }
  return loaded;
}

}  // namespace reentry
