#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "trislam/rng.hpp"

namespace trislam {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-15;
};

/// One flat block of trainable scalars with its gradient buffer and Adam
/// state. values/grads/adam_m/adam_v always share one length.
struct ParamBlock {
  std::string name;
  std::vector<double> values;
  std::vector<double> grads;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::int64_t step_count = 0;
  double learning_rate = 1e-3;
  bool quantize_storage = false;  // emulate float32 parameter storage

  std::size_t size() const { return values.size(); }
  void resize(std::size_t n, double init = 0.0) {
    values.assign(n, init);
    grads.assign(n, 0.0);
    adam_m.assign(n, 0.0);
    adam_v.assign(n, 0.0);
  }
  void zero_grads() { std::fill(grads.begin(), grads.end(), 0.0); }
};

// Standard Adam with bias correction. Throws on a non-finite gradient or a
// non-finite updated value, naming the block. Grads are zeroed afterward.
void adam_step(ParamBlock& block, double lr, const AdamConfig& cfg = {});

// Rounds stored values through float32 when the block requests quantized
// storage (applied automatically after adam_step; call after manual init).
void maybe_quantize(ParamBlock& block);

// Compares the analytic gradient stored in block.grads against a central
// difference of `loss` on n_probe randomly chosen coordinates. Returns the
// max of |a - fd| / max(1e-8, |a| + |fd|). `loss` must be a deterministic
// function of the current parameter state; block values are restored.
double finite_diff_check(const std::function<double()>& loss, ParamBlock& block, double eps,
                         int n_probe, Rng& rng);

using BlockId = std::int32_t;

/// Owns every trainable block. Handles stay valid for the store's lifetime,
/// and a copied store is a self-contained snapshot of all parameters.
class ParamStore {
 public:
  BlockId add_block(const std::string& name, std::size_t n, double learning_rate,
                    double init = 0.0);
  ParamBlock& block(BlockId id) { return blocks_[static_cast<std::size_t>(id)]; }
  const ParamBlock& block(BlockId id) const { return blocks_[static_cast<std::size_t>(id)]; }

  BlockId find(const std::string& name) const;  // -1 when absent
  std::size_t block_count() const { return blocks_.size(); }
  std::size_t total_params() const;

  void set_quantize_storage(bool on) { quantize_storage_ = on; }
  bool quantize_storage() const { return quantize_storage_; }

  // Adam step with the block's stored learning rate.
  void step(BlockId id, const AdamConfig& cfg = {}) {
    adam_step(block(id), block(id).learning_rate, cfg);
  }

 private:
  std::vector<ParamBlock> blocks_;
  std::map<std::string, BlockId> index_;
  bool quantize_storage_ = false;
};

}  // namespace trislam
