#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taskforge/equation.hpp"

namespace taskforge {

// --- structural helpers -----------------------------------------------------

// No state boxes and no stochastic fixed functions anywhere.
bool diagram_deterministic(const Diagram& d);

// The constant-zero scalar on the given input interface: every input slot is
// deleted and a single nonneg(1) zero constant feeds the output. Equations
// "E = 0" use this as their right side.
Diagram zero_diagram(const std::vector<WireType>& inputs);
bool is_zero_diagram(const Diagram& d);

// Extracts the sub-diagram computing the value seen at producer port `at`
// (box output or "$in" slot), as a diagram over the full original input
// interface with one output. Copy boxes are traversed transparently and
// re-inserted only where the cone demands a value more than once, so no box
// is ever duplicated; unused inputs are deleted.
Diagram slice(const Diagram& d, const PortRef& at);

// --- rewrite rules -----------------------------------------------------------
// Every rule throws Error("NotApplicable", ...) when its pattern does not
// match, and validates what it builds. Forward followed by backward at the
// same site reproduces a canonically identical equation (and vice versa),
// except for rule_postcompose which has no inverse.

// Pushes a deterministic single-output box through the copy that consumes it
// (forward: one box feeding Copy becomes two twin boxes fed by copies of the
// box's inputs). `site` names the box; `on_rhs` selects the equation side.
// Backward merges the twin pair created this way. Stochastic boxes are
// rejected: duplicating one changes the distribution ("StochasticBox").
TaskEquation rule_copy_through(const TaskEquation& eq, const std::string& site,
                               bool on_rhs = false, bool backward = false);

// Splits "w1*E1 + w2*E2 = 0" (strictly positive weights, else
// "NonPositiveWeight") into E1 = 0 and E2 = 0.
std::vector<TaskEquation> rule_lincomb_split(const TaskEquation& eq);

// Backward direction: recombines two equations-to-zero over the same
// interface into "w1*E1 + w2*E2 = 0".
TaskEquation rule_lincomb_merge(const TaskEquation& a, const TaskEquation& b,
                                float w1, float w2);

// Collapses "D(f, g) = 0" into "f = g" when D is a positive divergence box
// (one that is zero exactly on the diagonal).
TaskEquation rule_positivity_collapse(const TaskEquation& eq);

// Backward direction: turns "f = g" into "D(f, g) = 0" using the named
// positive divergence function.
TaskEquation rule_positivity_introduce(const TaskEquation& eq,
                                       const std::string& fn);

// Post-composes both sides with a deterministic diagram (f = g implies
// d.f = d.g). One-directional: information may be discarded.
TaskEquation rule_postcompose(const TaskEquation& eq, const Diagram& post);

// --- numeric oracle -----------------------------------------------------------

// Compares two equations that are claimed pointwise-equivalent: draws n input
// samples (by wire kind) and one shared random parameter fill, evaluates both
// residuals and returns the largest |r_before - r_after|. Both equations must
// be deterministic.
double numeric_oracle(const TaskEquation& before, const TaskEquation& after,
                      int n, std::uint64_t seed);

// --- proof scripts -------------------------------------------------------------

struct ProofStep {
  std::string rule;          // copy_through | lincomb_split |
                             // positivity_collapse | postcompose
  bool backward = false;     // inverse direction (not for postcompose)
  int eq = 0;                // index into the current equation set
  std::string site;          // copy_through: box id
  bool on_rhs = false;       // copy_through: site is on the right side
  int eq2 = -1;              // lincomb backward: second equation index
  float w1 = 1.0f;           // lincomb backward: merge weights
  float w2 = 1.0f;
  std::string fn = "sqdist"; // positivity backward: divergence function
  Diagram post;              // postcompose payload
};

struct StepRecord {
  std::string rule;
  bool backward = false;
  int eq = 0;
  std::uint64_t before_hash = 0; // equation-set canonical hash
  std::uint64_t after_hash = 0;
  std::vector<std::string> discharged; // canonicals of tautologies dropped here
  bool oracle_ran = false;
  double deviation = 0.0;
};

struct ProofScript {
  std::string name;
  EquationSet source;
  EquationSet target;
  std::vector<ProofStep> steps;
};

struct CheckOptions {
  bool run_oracle = true;
  int oracle_samples = 100;
  std::uint64_t oracle_seed = 7;
  double oracle_tol = 1e-4;
};

struct ProofVerdict {
  bool verified = false;
  std::string failure; // empty when verified
  std::vector<StepRecord> steps;
  std::string final_canonical;
};

// Replays the script from `source`, checking every step structurally and
// (when enabled) numerically, then compares the resulting set against
// `target` up to canonical form. Tautologies produced by positivity collapse
// are discharged (removed) and recorded on their step.
ProofVerdict check_proof(const ProofScript& script, const CheckOptions& opts = {});

} // namespace taskforge
