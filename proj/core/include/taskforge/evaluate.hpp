#pragma once

#include <set>
#include <string>
#include <vector>

#include "taskforge/diagram.hpp"
#include "taskforge/distribution.hpp"
#include "taskforge/mlp.hpp"
#include "taskforge/rng.hpp"
#include "taskforge/tape.hpp"

namespace taskforge {

struct EvalOptions {
  // Parameter spaces receiving gradients. nullptr means "all". Spaces outside
  // the set are loaded as constants: gradients still flow through the boxes
  // that use them but never reach the masked parameters.
  const std::set<std::string>* trainable = nullptr;
  // Batch size when the diagram has no inputs (otherwise taken from inputs).
  int batch = -1;
};

// Evaluates a validated diagram on the tape. `inputs` supplies one node per
// input slot. Stochastic boxes draw from `rng` in the diagram's deterministic
// topological order, so equal diagrams consume equal draw sequences.
std::vector<NodeId> evaluate_nodes(Tape& tape, const Diagram& d,
                                   const std::vector<NodeId>& inputs, Rng& rng,
                                   const EvalContext& ctx,
                                   const EvalOptions& opts = {});

// Convenience wrapper: runs a private tape and returns plain tensors.
std::vector<Tensor> evaluate(const Diagram& d, const std::vector<Tensor>& inputs,
                             const ParamStore& params, Rng& rng,
                             const DistRegistry* dists = nullptr,
                             const EvalOptions& opts = {});

} // namespace taskforge
