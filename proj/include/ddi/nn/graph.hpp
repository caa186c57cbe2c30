#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "ddi/nn/tensor.hpp"

// Tape-based reverse-mode differentiation over the handful of layers the
// extraction network needs. Ops that read parameters accumulate their
// gradients straight into Param::grad during backward().
namespace ddi::nn {

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

class Graph {
 public:
  Var constant(Tensor value);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = seed and runs every recorded backward step.
  void backward(Var loss, double seed = 1.0);

  /// Rows of `table` for each id; ids at or beyond `length` (and id 0, the
  /// pad id) give zero rows and receive no gradient. Output [ids.size(), dim].
  Var lookup(Param& table, std::span<const int> ids, std::size_t length);

  /// Valid convolution with `window`-row kernels then max over positions.
  /// x is [T, D] (output [F]) or [B, T, D] (output [B, F]); inputs shorter
  /// than the window are zero-padded. w is [F, window * D], b is [F].
  Var conv_maxpool(Var x, Param& w, Param& b, std::size_t window);

  /// One LSTM direction over the first `length` rows of x [n, D]. Gates are
  /// stacked i, f, g, o in wx [4h, D], wh [4h, h], b [4h]. Rows at or past
  /// `length` come out zero. Output [n, h].
  Var lstm(Var x, Param& wx, Param& wh, Param& b, std::size_t length, bool reverse);

  /// Row-wise concatenation of [n, a] and [n, b]; for rank-1 inputs, plain concatenation.
  Var concat(std::span<const Var> parts);

  /// Same data, new shape (element counts must agree).
  Var reshape(Var x, Shape shape);

  /// Zeroes rows at or past `length`.
  Var mask_rows(Var x, std::size_t length);

  /// Inverted dropout; identity when rate == 0.
  Var dropout(Var x, double rate, std::mt19937_64& rng);

  /// Identity forward; multiplies the upstream gradient by `factor`.
  Var scale_grad(Var x, double factor);

  /// y = factor * x in both directions.
  Var scale(Var x, double factor);

  /// x [n, D] -> [n, O] or x [D] -> [O] with w [O, D], b [O].
  Var affine(Var x, Param& w, Param& b);

  /// sum_i weights[i] * -log softmax(logits_i)[targets[i]] / denominator.
  /// logits is [n, C] (or [C] with one target). Rows with weight 0 are skipped.
  Var cross_entropy(Var logits, std::span<const int> targets, std::span<const double> weights, double denominator);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void()> backward;
  };

  Var push(Tensor value, std::function<void()> backward = {});
  Tensor& grad_of(std::size_t id);
  void check(Var v, const char* op) const;

  std::vector<Node> nodes_;
};

/// Numerically stable softmax (max-subtracted).
std::vector<double> softmax(std::span<const double> logits);
/// -weight * log(dist[target]); throws on an out-of-range target.
double cross_entropy(std::span<const double> dist, std::size_t target, double weight = 1.0);

}  // namespace ddi::nn
