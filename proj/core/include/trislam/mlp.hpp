#pragma once

#include <vector>

#include "trislam/param_store.hpp"

namespace trislam {

/// Two-hidden-layer perceptron with ReLU hiddens and a linear output,
/// weights in one flat ParamBlock. Block layout: W1 (h x in, row-major),
/// b1, W2 (h x h), b2, W3 (out x h), b3.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore& store, const std::string& block_name, int in_dim, int hidden_dim, int out_dim,
      double learning_rate, Rng& rng);

  int in_dim() const { return in_; }
  int hidden_dim() const { return hidden_; }
  int out_dim() const { return out_; }
  BlockId block() const { return block_; }

  /// Per-sample activations kept for backward, plus backward scratch.
  struct Workspace {
    std::vector<double> a1, a2;    // post-ReLU hidden activations
    std::vector<double> dz1, dz2;  // backward scratch
  };

  // Writes out_dim() values to `out`. Throws on a non-finite output.
  void forward(const ParamStore& store, const double* x, double* out, Workspace& ws) const;

  // d_out: upstream gradient (length out_dim). Adds input gradient to d_x
  // (length in_dim) when non-null; accumulates weight gradients when
  // accumulate_weights is set. `x` and `ws` must come from the matching
  // forward call.
  void backward(ParamStore& store, const double* x, Workspace& ws, const double* d_out,
                double* d_x, bool accumulate_weights) const;

  // Direct access for tests and initialization tweaks.
  double* w1(ParamStore& s) const { return s.block(block_).values.data(); }
  double* b1(ParamStore& s) const { return w1(s) + hidden_ * in_; }
  double* w2(ParamStore& s) const { return b1(s) + hidden_; }
  double* b2(ParamStore& s) const { return w2(s) + hidden_ * hidden_; }
  double* w3(ParamStore& s) const { return b2(s) + hidden_; }
  double* b3(ParamStore& s) const { return w3(s) + out_ * hidden_; }

 private:
  int in_ = 0, hidden_ = 0, out_ = 0;
  BlockId block_ = -1;
};

}  // namespace trislam
