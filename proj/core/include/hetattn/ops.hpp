#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hetattn/rng.hpp"
#include "hetattn/tape.hpp"

namespace hetattn {

using Mask = std::vector<std::uint8_t>;

inline constexpr double kProbabilityFloor = 1e-12;

// Value-level primitives. The tape ops below are built on these.

/// Softmax over positions with mask[i] != 0; masked-out entries are exactly 0.
/// Throws std::invalid_argument("empty attention support") on an all-zero mask.
std::vector<double> softmax_masked(std::span<const double> scores, std::span<const std::uint8_t> mask);

/// -sum target_i * ln(max(predicted_i, 1e-12)).
double cross_entropy(std::span<const double> predicted, std::span<const double> target);

double sigmoid(double x);

namespace ops {

Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);  // elementwise
Var scale(Tape& t, Var a, double s);
Var sigmoid(Tape& t, Var a);
Var tanh(Tape& t, Var a);
Var abs(Tape& t, Var a);
Var square(Tape& t, Var a);
Var sum(Tape& t, Var a);                 // -> 1 x 1
Var dot(Tape& t, Var a, Var b);          // same shapes -> 1 x 1
Var matmul(Tape& t, Var a, Var b);       // (n x k)(k x m)
Var matmul_nt(Tape& t, Var a, Var b);    // (n x k)(m x k)^T
/// x (n x in), w (out x in), b (1 x out) -> x w^T + b, bias broadcast over rows.
Var affine(Tape& t, Var x, Var w, Var b);
Var concat_cols(Tape& t, Var a, Var b);  // same rows
/// 1 x n -> 1 x width, zero padding on the right.
Var pad_cols(Tape& t, Var a, std::size_t width);
/// Rows of a table (e.g. an embedding matrix) -> indices.size() x table.cols.
Var gather_rows(Tape& t, Var table, std::span<const std::size_t> indices);
/// Row-vector softmax over masked positions (1 x n).
Var softmax_masked(Tape& t, Var scores, const Mask& mask);
Var softmax(Tape& t, Var scores);
/// Cross-entropy of a 1 x K probability row against a one-hot target class.
Var cross_entropy(Tape& t, Var probs, std::size_t target);
/// Inverted dropout with keep probability 1 - rate.
Var dropout(Tape& t, Var a, double rate, Rng& rng);

/// Fused unidirectional LSTM over the rows of x (T x in). Weights are stacked
/// gate-major [input; forget; output; candidate] over [x_t; h_{t-1}], so
/// w is 4H x (in + H) and b is 1 x 4H. Returns T x H with row t = h_t at the
/// token's original position regardless of direction.
Var lstm(Tape& t, Var x, Var w, Var b, bool reverse);

}  // namespace ops
}  // namespace hetattn
