#pragma once

#include <map>
#include <string>

#include "taskforge/mlp.hpp"
#include "taskforge/tensor.hpp"

namespace taskforge {

// Decoupled-weight-decay Adam. Element-wise gradient clipping to ±clip is
// applied before the moment updates; weight decay multiplies the raw
// parameter, outside the adaptive rescaling.
struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
  double clip = 1.0; // <= 0 disables clipping
};

class AdamW {
public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  const AdamWConfig& config() const { return cfg_; }
  long step_count() const { return t_; }

  // Applies one update to every space present in `grads`. Spaces missing from
  // `grads` are untouched (their gradient for this step is exactly zero, but
  // decay/moments do not advance for them either; the step counter is global).
  void step(ParamStore& params, const std::map<std::string, Tensor>& grads);

private:
  struct Moments {
    Tensor m, v;
  };
  AdamWConfig cfg_;
  std::map<std::string, Moments> state_;
  long t_ = 0;
};

} // namespace taskforge
