#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "reentry/tensor.hpp"

namespace reentry::ad {

using Mask = std::vector<bool>;

enum class Activation { sigmoid, tanh, relu, softmax_lastaxis };

// Gathers rows of `table` [V x d]. Rows whose id equals pad_id are zero and
// pass no gradient back to the table.
Tensor embedding_lookup(Tape& tape, const Tensor& table, std::span<const int> ids,
                        std::optional<int> pad_id = std::nullopt);

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// Elementwise sum. `b` may also be a single row broadcast over the rows of `a`.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);

Tensor scale(Tape& tape, const Tensor& x, double factor);

Tensor concat(Tape& tape, const std::vector<Tensor>& parts, int axis);

Tensor hadamard(Tape& tape, const Tensor& a, const Tensor& b);

Tensor transpose(Tape& tape, const Tensor& x);

// Copies a single row `v` into `n` rows.
Tensor tile_rows(Tape& tape, const Tensor& v, std::size_t n);

// Columns [begin, end) of every row.
Tensor slice_cols(Tape& tape, const Tensor& x, std::size_t begin, std::size_t end);

Tensor select_rows(Tape& tape, const Tensor& x, std::span<const std::size_t> rows);

// Mean over the rows where mask is true; result has shape [d].
Tensor mean_pool(Tape& tape, const Tensor& rows, const Mask& mask);

// Column-wise maximum over rows; result has shape [d]. Ties go to the lowest row.
Tensor max_pool_time(Tape& tape, const Tensor& rows);

Tensor activation(Tape& tape, Activation kind, const Tensor& x);
inline Tensor sigmoid(Tape& tape, const Tensor& x) { return activation(tape, Activation::sigmoid, x); }
inline Tensor tanh(Tape& tape, const Tensor& x) { return activation(tape, Activation::tanh, x); }
inline Tensor relu(Tape& tape, const Tensor& x) { return activation(tape, Activation::relu, x); }

// Softmax along the last axis restricted to columns where mask is true.
// Masked outputs are exactly zero. A row with every column masked is all zero.
Tensor masked_softmax(Tape& tape, const Tensor& x, const Mask& column_mask);

// Per-row maximum over unmasked columns; shape [rows x 1]. Fully masked rows give 0.
Tensor masked_row_max(Tape& tape, const Tensor& x, const Mask& column_mask);

Tensor sum(Tape& tape, const Tensor& x);

// Sliding windows over rows: output row p is rows p..p+width-1 laid side by side.
Tensor unfold_rows(Tape& tape, const Tensor& x, std::size_t width);

// One LSTM step. `gates_in` is x_t W_x + b (1 x 4h, gate order i f g o);
// `state` is [h ; c] (1 x 2h); `w_h` is h x 4h. Returns the next [h ; c].
Tensor lstm_step(Tape& tape, const Tensor& gates_in, const Tensor& state, const Tensor& w_h);

}  // namespace reentry::ad
