#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "taskforge/distribution.hpp"
#include "taskforge/optim.hpp"
#include "taskforge/task.hpp"

namespace taskforge {

struct ObjectiveOptions {
  // Atom-name groups stepped in rotation (adversarial training). Empty means
  // one simultaneous group containing every atom. When given, every atom must
  // appear in exactly one group.
  std::vector<std::vector<std::string>> alternating;
  // Optional diversity bonus per atom name: weight * (mean entropy of the
  // atom's first output - entropy of its mean output) is added to the loss.
  std::map<std::string, float> entropy_bonus;
};

// A task checked against a parameter store and distribution registry, with
// the step grouping resolved. Atom order follows the task.
struct Objective {
  CompoundTask task;
  std::vector<std::vector<int>> groups; // atom indices per step group
  std::map<std::string, float> entropy_bonus;
};

// Validates everything the training loop will rely on: distributions exist
// and produce exactly the input interfaces, learner spaces exist with
// matching network shapes, trainable constants are declared vectors, and the
// alternating groups partition the atoms.
Objective compile_objective(const CompoundTask& task, const ParamStore& params,
                            const DistRegistry& dists,
                            const ObjectiveOptions& opts = {});

// Builds group `g`'s weighted loss on the shared tape: for every atom, draws
// a batch, runs both sides with the atom's gradient mask, applies its
// divergence wire by wire and averages over the batch. Returns the scalar
// loss node; per-atom means are reported through `atom_losses`.
NodeId objective_forward(Tape& tape, const Objective& obj, int group, int batch,
                         Rng& rng, const EvalContext& ctx,
                         std::map<std::string, double>* atom_losses = nullptr);

struct StepReport {
  double total = 0.0;
  std::map<std::string, double> atom_loss;
};

// One optimisation step on group `g`: forward, backward, parameter update.
StepReport objective_step(const Objective& obj, int group, int batch, Rng& rng,
                          ParamStore& params, const DistRegistry& dists,
                          AdamW& opt);

} // namespace taskforge
