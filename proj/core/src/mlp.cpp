#include "trislam/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace trislam {

Mlp::Mlp(ParamStore& store, const std::string& block_name, int in_dim, int hidden_dim, int out_dim,
         double learning_rate, Rng& rng)
    : in_(in_dim), hidden_(hidden_dim), out_(out_dim) {
  const std::size_t n = static_cast<std::size_t>(hidden_ * in_ + hidden_ + hidden_ * hidden_ +
                                                 hidden_ + out_ * hidden_ + out_);
  block_ = store.add_block(block_name, n, learning_rate);
  auto& values = store.block(block_).values;
  std::size_t pos = 0;
  auto init_layer = [&](int fan_in, int fan_out) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (int i = 0; i < fan_out * fan_in; ++i) values[pos++] = rng.uniform(-bound, bound);
    for (int i = 0; i < fan_out; ++i) values[pos++] = 0.0;  // biases
  };
  init_layer(in_, hidden_);
  init_layer(hidden_, hidden_);
  init_layer(hidden_, out_);
  maybe_quantize(store.block(block_));
}

void Mlp::forward(const ParamStore& store, const double* x, double* out, Workspace& ws) const {
  const double* p = store.block(block_).values.data();
  const double* W1 = p;
  const double* B1 = W1 + hidden_ * in_;
  const double* W2 = B1 + hidden_;
  const double* B2 = W2 + hidden_ * hidden_;
  const double* W3 = B2 + hidden_;
  const double* B3 = W3 + out_ * hidden_;

  ws.a1.resize(static_cast<std::size_t>(hidden_));
  ws.a2.resize(static_cast<std::size_t>(hidden_));
  for (int i = 0; i < hidden_; ++i) {
    const double* row = W1 + static_cast<std::ptrdiff_t>(i) * in_;
    double acc = B1[i];
    for (int j = 0; j < in_; ++j) acc += row[j] * x[j];
    ws.a1[static_cast<std::size_t>(i)] = acc > 0.0 ? acc : 0.0;
  }
  for (int i = 0; i < hidden_; ++i) {
    const double* row = W2 + static_cast<std::ptrdiff_t>(i) * hidden_;
    double acc = B2[i];
    for (int j = 0; j < hidden_; ++j) acc += row[j] * ws.a1[static_cast<std::size_t>(j)];
    ws.a2[static_cast<std::size_t>(i)] = acc > 0.0 ? acc : 0.0;
  }
  for (int o = 0; o < out_; ++o) {
    const double* row = W3 + static_cast<std::ptrdiff_t>(o) * hidden_;
    double acc = B3[o];
    for (int j = 0; j < hidden_; ++j) acc += row[j] * ws.a2[static_cast<std::size_t>(j)];
    if (!std::isfinite(acc))
      throw std::runtime_error("non-finite output from decoder '" + store.block(block_).name + "'");
    out[o] = acc;
  }
}

void Mlp::backward(ParamStore& store, const double* x, Workspace& ws, const double* d_out,
                   double* d_x, bool accumulate_weights) const {
  auto& block = store.block(block_);
  const double* p = block.values.data();
  const double* W1 = p;
  const double* W2 = W1 + hidden_ * in_ + hidden_;
  const double* W3 = W2 + hidden_ * hidden_ + hidden_;
  double* g = block.grads.data();
  double* gW1 = g;
  double* gB1 = gW1 + hidden_ * in_;
  double* gW2 = gB1 + hidden_;
  double* gB2 = gW2 + hidden_ * hidden_;
  double* gW3 = gB2 + hidden_;
  double* gB3 = gW3 + out_ * hidden_;

  // d a2
  auto& dz2 = ws.dz2;
  dz2.assign(static_cast<std::size_t>(hidden_), 0.0);
  for (int o = 0; o < out_; ++o) {
    const double go = d_out[o];
    const double* row = W3 + static_cast<std::ptrdiff_t>(o) * hidden_;
    for (int j = 0; j < hidden_; ++j) dz2[static_cast<std::size_t>(j)] += go * row[j];
    if (accumulate_weights) {
      double* grow = gW3 + static_cast<std::ptrdiff_t>(o) * hidden_;
      for (int j = 0; j < hidden_; ++j) grow[j] += go * ws.a2[static_cast<std::size_t>(j)];
      gB3[o] += go;
    }
  }
  // through ReLU of layer 2
  for (int j = 0; j < hidden_; ++j)
    if (ws.a2[static_cast<std::size_t>(j)] <= 0.0) dz2[static_cast<std::size_t>(j)] = 0.0;

  auto& dz1 = ws.dz1;
  dz1.assign(static_cast<std::size_t>(hidden_), 0.0);
  for (int i = 0; i < hidden_; ++i) {
    const double gi = dz2[static_cast<std::size_t>(i)];
    if (gi == 0.0) continue;
    const double* row = W2 + static_cast<std::ptrdiff_t>(i) * hidden_;
    for (int j = 0; j < hidden_; ++j) dz1[static_cast<std::size_t>(j)] += gi * row[j];
    if (accumulate_weights) {
      double* grow = gW2 + static_cast<std::ptrdiff_t>(i) * hidden_;
      for (int j = 0; j < hidden_; ++j) grow[j] += gi * ws.a1[static_cast<std::size_t>(j)];
      gB2[i] += gi;
    }
  }
  for (int j = 0; j < hidden_; ++j)
    if (ws.a1[static_cast<std::size_t>(j)] <= 0.0) dz1[static_cast<std::size_t>(j)] = 0.0;

  for (int i = 0; i < hidden_; ++i) {
    const double gi = dz1[static_cast<std::size_t>(i)];
    if (gi == 0.0) continue;
    const double* row = W1 + static_cast<std::ptrdiff_t>(i) * in_;
    if (d_x)
      for (int j = 0; j < in_; ++j) d_x[j] += gi * row[j];
    if (accumulate_weights) {
      double* grow = gW1 + static_cast<std::ptrdiff_t>(i) * in_;
      for (int j = 0; j < in_; ++j) grow[j] += gi * x[j];
      gB1[i] += gi;
    }
  }
}

}  // namespace trislam
