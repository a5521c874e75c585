#include "reentry/interaction.hpp"

#include <algorithm>

#include "reentry/errors.hpp"

namespace reentry {

using ad::Tape;
using ad::Tensor;

nlohmann::json AttentionTrace::to_json() const {
  return {{"context_weights", context_weights}, {"history_weights", history_weights}, {"beta", beta}};
}

namespace {

std::vector<std::size_t> unmasked(const std::vector<bool>& mask) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) idx.push_back(i);
  return idx;
}

void check_context(const InteractionInputs& in) {
  if (!in.context.defined() || unmasked(in.context_mask).empty()) {
    throw ShapeError("interaction: empty context");
  }
  if (in.context_mask.size() != in.context.rows()) {
    throw ShapeError("interaction: context mask length differs from row count");
  }
}

bool has_history(const InteractionInputs& in) {
  if (!in.history.defined()) return false;
  if (in.history_mask.size() != in.history.rows()) {
    throw ShapeError("interaction: history mask length differs from row count");
  }
  return std::find(in.history_mask.begin(), in.history_mask.end(), true) != in.history_mask.end();
}

Tensor last_context_row(Tape& tape, const InteractionInputs& in) {
  const std::size_t last[] = {unmasked(in.context_mask).back()};
  return ad::select_rows(tape, in.context, last);
}

std::size_t history_width(const InteractionInputs& in) {
  return in.history.defined() ? in.history.cols() : in.history_dim;
}

// Row of weights spread back over the full masked axis.
std::vector<double> expand(std::span<const double> weights, const std::vector<bool>& mask) {
  std::vector<double> out(mask.size(), 0.0);
  std::size_t k = 0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out[i] = weights[k++];
  return out;
}

Tensor uniform_row(std::size_t n) {
  return Tensor::from({1, n}, std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

}  // namespace

InteractionOutput interact_concat(Tape& tape, const InteractionInputs& in) {
  check_context(in);
  const Tensor last = last_context_row(tape, in);
  Tensor user;
  if (has_history(in)) {
    user = ad::mean_pool(tape, in.history, in.history_mask);
  } else {
    const std::size_t d = history_width(in);
    if (d == 0) throw ShapeError("interact_concat: unknown history width");
    user = Tensor::zeros({1, d});
  }
  return {ad::concat(tape, {last, user}, 1), {}};
}

InteractionOutput interact_attention(Tape& tape, const InteractionInputs& in, const Tensor& projection) {
  check_context(in);
  InteractionOutput out;
  Tensor alpha;
  if (has_history(in)) {
    Tensor user = ad::mean_pool(tape, in.history, in.history_mask);
    if (projection.defined()) user = ad::matmul(tape, user, projection);
    const Tensor scores = ad::transpose(tape, ad::matmul(tape, in.context, ad::transpose(tape, user)));
    alpha = ad::masked_softmax(tape, scores, in.context_mask);
  } else {
    const auto idx = unmasked(in.context_mask);
    std::vector<double> w(in.context_mask.size(), 0.0);
    for (std::size_t i : idx) w[i] = 1.0 / static_cast<double>(idx.size());
    const std::size_t n = w.size();
    alpha = Tensor::from({1, n}, std::move(w));
  }
  out.representation = ad::matmul(tape, alpha, in.context);
  out.trace.context_weights.assign(alpha.values().begin(), alpha.values().end());
  return out;
}

InteractionOutput interact_memnet(Tape& tape, const InteractionInputs& in, const MemNetWeights& w) {
  check_context(in);
  if (w.output_maps.empty()) throw ShapeError("interact_memnet: at least one hop required");
  InteractionOutput out;
  Tensor query = last_context_row(tape, in);
  if (!has_history(in)) {
    out.representation = query;
    return out;
  }
  Tensor keys = ad::matmul(tape, in.history, w.first_input_map);
  for (const Tensor& output_map : w.output_maps) {
    const Tensor scores = ad::matmul(tape, query, ad::transpose(tape, keys));
    const Tensor alpha = ad::masked_softmax(tape, scores, in.history_mask);
    const Tensor values = ad::matmul(tape, in.history, output_map);
    query = ad::add(tape, query, ad::matmul(tape, alpha, values));
    out.trace.history_weights.emplace_back(alpha.values().begin(), alpha.values().end());
    keys = values;  // adjacent tying: the next hop reads with this hop's output map
  }
  out.representation = query;
  return out;
}

Tensor biattention_scores(Tape& tape, const Tensor& context, const Tensor& history, const Tensor& score_weights) {
  const std::size_t d = context.cols();
  if (history.cols() != d) throw ShapeError("biattention_scores: context and history widths differ");
  if (score_weights.size() != 3 * d) throw ShapeError("biattention_scores: weight vector must have 3d entries");
  const std::size_t n = context.rows(), m = history.rows();
  const Tensor& w_row = score_weights;
  const Tensor w_ctx = ad::transpose(tape, ad::slice_cols(tape, w_row, 0, d));
  const Tensor w_hist = ad::transpose(tape, ad::slice_cols(tape, w_row, d, 2 * d));
  const Tensor w_prod = ad::slice_cols(tape, w_row, 2 * d, 3 * d);

  const Tensor ctx_term = ad::matmul(tape, ad::matmul(tape, context, w_ctx), Tensor::from({1, m}, std::vector<double>(m, 1.0)));
  const Tensor hist_term = ad::transpose(tape, ad::matmul(tape, history, w_hist));
  const Tensor weighted = ad::hadamard(tape, context, ad::tile_rows(tape, w_prod, n));
  const Tensor prod_term = ad::matmul(tape, weighted, ad::transpose(tape, history));
  return ad::add(tape, ad::add(tape, prod_term, ctx_term), hist_term);
}

InteractionOutput interact_biattention(Tape& tape, const InteractionInputs& in, const BiAttentionWeights& w) {
  check_context(in);
  const auto rows = unmasked(in.context_mask);
  const std::size_t n = rows.size();
  Tensor ctx = ad::select_rows(tape, in.context, rows);
  if (w.projection.defined()) ctx = ad::matmul(tape, ctx, w.projection);
  const std::size_t d = ctx.cols();

  InteractionOutput out;
  Tensor attended;  // u-bar per turn
  Tensor beta;
  if (has_history(in)) {
    const Tensor scores = biattention_scores(tape, ctx, in.history, w.score);
    const Tensor alpha = ad::masked_softmax(tape, scores, in.history_mask);
    attended = ad::matmul(tape, alpha, in.history);
    const Tensor best = ad::masked_row_max(tape, scores, in.history_mask);
    beta = ad::masked_softmax(tape, ad::transpose(tape, best), std::vector<bool>(n, true));

    const std::size_t m = in.history.rows();
    out.trace.history_weights.assign(in.context_mask.size(), std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = alpha.values().subspan(i * m, m);
      out.trace.history_weights[rows[i]].assign(a.begin(), a.end());
    }
  } else {
    attended = Tensor::zeros({n, d});
    beta = uniform_row(n);
  }
  out.trace.beta = expand(beta.values(), in.context_mask);

  const Tensor summary = ad::tile_rows(tape, ad::matmul(tape, beta, ctx), n);
  const Tensor fused = ad::concat(
      tape, {ctx, attended, ad::hadamard(tape, ctx, attended), ad::hadamard(tape, ctx, summary)}, 1);
  const Tensor hidden = ad::relu(tape, ad::add(tape, ad::matmul(tape, fused, w.mlp_w), w.mlp_b));
  const Tensor layer1 = w.layer1.run(tape, hidden).states;
  out.representation = w.layer2.run(tape, layer1).final;
  return out;
}

InteractionOutput interact_context_only(Tape& tape, const InteractionInputs& in) {
  check_context(in);
  return {last_context_row(tape, in), {}};
}

Tensor predict(Tape& tape, const Tensor& representation, const Tensor& w, const Tensor& b) {
  return ad::sigmoid(tape, ad::add(tape, ad::matmul(tape, representation, w), b));
}

}  // namespace reentry
