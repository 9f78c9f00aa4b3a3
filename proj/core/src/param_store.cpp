#include "trislam/param_store.hpp"

#include <cmath>
#include <stdexcept>

namespace trislam {

namespace {
void quantize_to_float(std::vector<double>& xs) {
  for (double& x : xs) x = static_cast<double>(static_cast<float>(x));
}
}  // namespace

void maybe_quantize(ParamBlock& block) {
  if (block.quantize_storage) quantize_to_float(block.values);
}

void adam_step(ParamBlock& block, double lr, const AdamConfig& cfg) {
  const std::size_t n = block.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(block.grads[i]))
      throw std::runtime_error("non-finite gradient in block '" + block.name + "'");
  }
  block.step_count += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(block.step_count));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(block.step_count));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = block.grads[i];
    block.adam_m[i] = cfg.beta1 * block.adam_m[i] + (1.0 - cfg.beta1) * g;
    block.adam_v[i] = cfg.beta2 * block.adam_v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = block.adam_m[i] / bc1;
    const double v_hat = block.adam_v[i] / bc2;
    block.values[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    if (!std::isfinite(block.values[i]))
      throw std::runtime_error("non-finite parameter after step in block '" + block.name + "'");
  }
  if (block.quantize_storage) {
    quantize_to_float(block.values);
    quantize_to_float(block.adam_m);
    quantize_to_float(block.adam_v);
  }
  block.zero_grads();
}

double finite_diff_check(const std::function<double()>& loss, ParamBlock& block, double eps,
                         int n_probe, Rng& rng) {
  if (block.size() == 0) return 0.0;
  double worst = 0.0;
  for (int probe = 0; probe < n_probe; ++probe) {
    const std::size_t i = static_cast<std::size_t>(rng.uniform_index(block.size()));
    const double saved = block.values[i];
    block.values[i] = saved + eps;
    const double plus = loss();
    block.values[i] = saved - eps;
    const double minus = loss();
    block.values[i] = saved;
    const double fd = (plus - minus) / (2.0 * eps);
    const double a = block.grads[i];
    const double rel = std::abs(a - fd) / std::max(1e-8, std::abs(a) + std::abs(fd));
    worst = std::max(worst, rel);
  }
  return worst;
}

BlockId ParamStore::add_block(const std::string& name, std::size_t n, double learning_rate,
                              double init) {
  if (index_.count(name)) throw std::runtime_error("duplicate parameter block '" + name + "'");
  ParamBlock block;
  block.name = name;
  block.learning_rate = learning_rate;
  block.quantize_storage = quantize_storage_;
  block.resize(n, init);
  const BlockId id = static_cast<BlockId>(blocks_.size());
  blocks_.push_back(std::move(block));
  index_[name] = id;
  return id;
}

BlockId ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? BlockId{-1} : it->second;
}

std::size_t ParamStore::total_params() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b.size();
  return n;
}

}  // namespace trislam
