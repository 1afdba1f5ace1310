#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "taskforge/checkpoint.hpp"
#include "taskforge/finite.hpp"
#include "taskforge/objective.hpp"
#include "taskforge/optim.hpp"

namespace taskforge {

// Hyperparameters of one training run. The task, layouts and distributions
// travel separately (see taskspec.hpp for the JSON front end).
struct RunConfig {
  std::int64_t steps = 1000;
  int batch = 128;
  std::uint64_t seed = 0;
  int log_every = 100;     // metric cadence in steps (first and last included)
  AdamWConfig optim{};
  std::string out_dir;     // when set: writes metrics.csv + checkpoint/
  std::string init_from;   // checkpoint dir to warm-start matching spaces from
};

struct MetricRow {
  std::int64_t step = 0;
  std::string atom; // atom name, or "total" for the weighted sum
  double loss = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<MetricRow> metrics;
  std::string metrics_path;    // "" when nothing was written
  std::string checkpoint_dir;  // "" when nothing was written
};

// Runs `steps` optimisation steps (alternating groups rotate per step),
// logging every atom's loss plus the weighted total each cadence. steps = 0
// checkpoints the freshly initialised parameters. Deterministic per config:
// the same inputs give bit-identical metrics and checkpoints. A non-finite
// loss aborts with the failing step in the message.
TrainResult train(const CompoundTask& task,
                  const std::map<std::string, ParamLayout>& layouts,
                  const DistRegistry& dists, const ObjectiveOptions& opts,
                  const RunConfig& cfg);

// "step,atom,loss" rows, loss printed with enough digits to round-trip.
std::string metrics_to_csv(const std::vector<MetricRow>& rows);
void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& rows);

// Per-law residual statistics on frozen parameters.
struct LawRow {
  std::string atom;
  double mean_divergence = 0.0; // batch mean of the atom's divergence
  double weight = 1.0;
  // Fraction of samples satisfying the law, when the output makes one
  // applicable: argmax agreement for one-hot outputs, |sys - spec| <= 0.1
  // for scalar outputs. -1 when not applicable (e.g. image outputs).
  double accuracy = -1.0;
  int batch = 0;
};

struct LawReport {
  std::vector<LawRow> rows;
  // Sum of weight * mean_divergence (plus any configured entropy bonuses),
  // equal to the training loss on the same draws.
  double total = 0.0;
};

// Evaluates every atom on one fresh batch without touching the parameters.
// `dist_override` swaps the sampled distribution per atom name (held-out
// data); overrides must produce the atom's input interface. Throws
// ParamMismatch when the store does not cover the task's spaces.
LawReport eval_laws(const CompoundTask& task, const ParamStore& params,
                    const DistRegistry& dists, const ObjectiveOptions& opts,
                    int batch, std::uint64_t seed,
                    const std::map<std::string, std::string>& dist_override = {});
LawReport eval_laws(const Checkpoint& ckpt, const CompoundTask& task,
                    const DistRegistry& dists, const ObjectiveOptions& opts,
                    int batch, std::uint64_t seed,
                    const std::map<std::string, std::string>& dist_override = {});

// --- container probing --------------------------------------------------------

struct StackEvalConfig {
  std::string enc; // image -> latent
  std::string dec; // latent -> image
  std::string psh; // (container, latent) -> container
  std::string pop; // container -> (container, latent)
  std::string bot; // empty-container vector space
  std::string image_dist; // distribution producing one image component
};

struct StackDepthReport {
  int depth = 0;
  bool beyond_capacity = false;   // depth * LAT exceeds the container size
  std::vector<double> slot_mse;   // pop order: slot 0 is the first pop
  double mean_mse = 0.0;          // mean over slots (depth 0: empty residual)
};

// For each depth k: pushes k freshly encoded images, pops k times and
// reports the decode MSE against the original image per slot, averaged over
// `batch` independent stacks. Depth 0 reports the empty-container residual
// |pop(bot) - (bot, 0)|^2 instead.
std::vector<StackDepthReport> stack_eval(const ParamStore& params,
                                         const DistRegistry& dists,
                                         const StackEvalConfig& cfg,
                                         const std::vector<int>& depths,
                                         int batch, std::uint64_t seed);

// --- exact finite-domain probing ------------------------------------------------

// Enumerates a trained editor on a finite one-hot domain: entry [d * na + a]
// is argmax(put(onehot(d), onehot(a))). The diagram must map (d, a) wires of
// dims (nd, na) to one d wire.
std::vector<int> tabulate_put(const Diagram& put, const ParamStore& params,
                              const DistRegistry& dists, int nd, int na);
// Same for a reader: entry [d] is argmax(get(onehot(d))).
std::vector<int> tabulate_get(const Diagram& get, const ParamStore& params,
                              const DistRegistry& dists, int nd, int na);

struct BayesCheck {
  std::vector<double> tv; // per attribute, in joint.a_support order
  double max_tv = 0.0;
  bool pass = false;      // max_tv <= tol
};

// Compares the editor's enumerated output distribution put(D, a) against the
// conditional D | a of the given joint, per attribute, by total variation.
BayesCheck check_bayes_inversion(const FiniteManipulator& m,
                                 const JointFiniteDist& joint, double tol);

} // namespace taskforge
