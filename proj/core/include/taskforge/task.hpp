#pragma once

#include <set>
#include <string>
#include <vector>

#include "taskforge/diagram.hpp"
#include "taskforge/divergence.hpp"
#include "taskforge/equation.hpp"

namespace taskforge {

// One behavioural law: a pair of diagrams over the same interface that should
// agree on samples from `dist`. Carries defaults for objective compilation
// (divergence and weight); `trainable` lists the spaces this law is allowed
// to move (gradient masking freezes the rest).
struct AtomicTask {
  std::string name;
  Diagram sys;
  Diagram spec;
  std::string dist; // "" when the interface is empty
  std::set<std::string> trainable;
  Divergence div;
  double weight = 1.0;
};

struct CompoundTask {
  std::string name;
  std::vector<AtomicTask> atoms;
  // Adversarially trained spaces (discriminators). Two excluded spaces must
  // never appear in the same atom, so their gradient games stay independent.
  std::set<std::string> excluded;

  bool has_atom(const std::string& n) const;
  const AtomicTask& atom(const std::string& n) const;
};

// Interface/validity checks shared by all constructors.
AtomicTask make_atom(std::string name, Diagram sys, Diagram spec,
                     std::string dist, std::set<std::string> trainable,
                     Divergence div, double weight = 1.0);

TaskEquation to_equation(const AtomicTask& a);
EquationSet equations_of(const CompoundTask& t);

// Every parameter space referenced by learner boxes or trainable constants.
std::set<std::string> atom_spaces(const AtomicTask& a);
std::set<std::string> task_spaces(const CompoundTask& t);

// Structural checks: at least one atom, unique atom names, and no two
// excluded spaces sharing an atom. Throws on violation.
void validate_task(const CompoundTask& t);

// Concatenates atom lists (atom names must stay unique).
CompoundTask combine(std::string name, const std::vector<CompoundTask>& parts);

// Prefixes every atom name, so several instances of the same pattern can be
// combined without name collisions (e.g. "shape/PutGet", "colour/PutGet").
CompoundTask with_prefix(CompoundTask t, const std::string& prefix);

// Replaces every learner box over `space` by `impl` (interfaces must match);
// wherever `space` was trainable, the replacement's spaces become trainable.
CompoundTask specialise(const CompoundTask& task, const std::string& space,
                        const Diagram& impl);

// --- pattern constructors -------------------------------------------------

// Classify: cls(x) = y on labelled pairs (x, y).
CompoundTask make_classification(const WireType& x, const WireType& y,
                                    const std::string& cls,
                                    const std::string& dist, Divergence div,
                                    double weight = 1.0);

// Reconstruct: dec(enc(x)) = x.
CompoundTask make_autoencoding(const WireType& x, const WireType& lat,
                                  const std::string& enc, const std::string& dec,
                                  const std::string& dist, Divergence div,
                                  double weight = 1.0);

// True: dsc(x) = 1 on data; Fake: dsc(gen(z)) = 0 and Fool: dsc(gen(z)) = 1
// on drawn codes. The discriminator is frozen in Fool, the generator in Fake.
CompoundTask make_gan(const WireType& x, const WireType& code,
                         const std::string& gen, const std::string& dsc,
                         const std::string& data_dist,
                         const std::string& code_dist, Divergence div,
                         double weight = 1.0);

// Reconstruct through a sampled code plus Normalise: enc(x) matches the
// standard code statistics (rows are mean then spread).
CompoundTask make_vae(const WireType& x, const WireType& lat,
                         const std::string& enc, const std::string& dec,
                         const std::string& dist, Divergence recon_div,
                         double recon_weight = 1.0, double norm_weight = 1.0);

// Two adversarial pairs plus both round-trip constraints. f: X -> Y, g: Y -> X.
CompoundTask make_cyclegan(const WireType& x, const WireType& y,
                              const std::string& f, const std::string& g,
                              const std::string& dx, const std::string& dy,
                              const std::string& x_dist, const std::string& y_dist,
                              Divergence gan_div, Divergence cycle_div,
                              double gan_weight = 1.0, double cycle_weight = 1.0);

// Single law "E = 0" built from two registered nonnegative penalty functions
// (e_enc/e_dec name entries of the fixed-function registry that emit a
// nonneg scalar, e.g. "sqdist" or "absdist"):
//   code_extracting = true   E(x)    = gamma * e_enc(enc(x), enc(x))
//                                      + e_dec(dec(enc(x)), x)
//                            with the shared code written as one explicit
//                            Copy, so the law rewrites step by step into the
//                            reconstruction law;
//   code_extracting = false  E(x, z) = gamma * e_enc(enc(x), z)
//                                      + e_dec(dec(z), x)
//                            over an externally supplied code sample.
CompoundTask make_energy_min(const WireType& x, const WireType& lat,
                             const std::string& enc, const std::string& dec,
                             float gamma, const std::string& dist,
                             bool code_extracting = true,
                             const std::string& e_enc = "sqdist",
                             const std::string& e_dec = "sqdist");

// --- attribute manipulation -------------------------------------------------

struct ManipulationDists {
  std::string labelled;    // (x, a) with the true attribute
  std::string image;       // x alone
  std::string image_attr;  // (x, a') with an independently drawn attribute
  std::string image_attr2; // (x, a1', a2'), used by the strong variant
};

struct ManipulationOptions {
  bool strong = false; // adds PutPut and the editor adversary
  bool putput = false; // adds PutPut alone (implied by strong)
  bool undo = true;
  std::string dsc = "dsc";
  double w_classify = 1.0;
  double w_putget = 1.0;
  double w_getput = 1.0;
  double w_putput = 1.0;
  double w_undo = 1.0;
  double w_gan = 1.0;
};

// Laws over an editor put: (X, A) -> X and a reader get: X -> A:
//   Classify  get(x) = a                     labelled pairs
//   PutGet    get(put(x, a')) = a'
//   GetPut    put(x, get(x)) = x
//   Undo      put(put(x, a'), get(x)) = x
// and when strong:
//   PutPut    put(put(x, a1), a2) = put(x, a2)
//   True/Fake/Fool adversary on edited images.
CompoundTask make_manipulation(const WireType& x, const WireType& a,
                               const std::string& put, const std::string& get,
                               const ManipulationDists& dists,
                               Divergence attr_div, Divergence image_div,
                               const ManipulationOptions& opts = {});

// make_manipulation with opts.strong forced on (PutPut + the adversary).
CompoundTask make_strong_manipulation(const WireType& x, const WireType& a,
                                      const std::string& put,
                                      const std::string& get,
                                      const ManipulationDists& dists,
                                      Divergence attr_div, Divergence image_div,
                                      const ManipulationOptions& opts = {});

// Same laws for an editor that threads a scratchpad wire: putc: (X, A, C) ->
// (X, C), seeded by a trainable constant. Undo feeds the first edit's
// scratchpad into the second, so destroyed information can survive.
CompoundTask make_complement_manipulation(const WireType& x, const WireType& a,
                                const WireType& c, const std::string& putc,
                                const std::string& get, const std::string& seed,
                                const ManipulationDists& dists,
                                Divergence attr_div, Divergence image_div,
                                const ManipulationOptions& opts = {});

// How the editor is realised inside the shared latent space.
enum class PutStyle {
  LinearOffset, // put(x, a) = dec(enc(x) + vec(a)); vec is the put space
  LatentNet,    // put(x, a[, c]) = dec/split(net(enc(x) ++ a [++ c]))
};

struct LatentSpaces {
  std::string enc;  // shared encoder, X -> LAT
  std::string dec;  // shared decoder, LAT -> X
  std::string get;  // reader head, LAT -> A
  std::string put;  // editor head (offset map or latent net)
  std::string seed; // scratchpad seed constant (complemented variant only)
};

// Manipulation realised inside a shared autoencoder's latent space:
//   get(x) = head(enc(x)), and put per PutStyle. When c.dim > 0 the
// complemented variant is built instead (style is forced to LatentNet and
// the net maps enc(x) ++ a ++ c to a latent/complement pair). Built by
// specialising the abstract editor/reader of make_manipulation, so the atom
// structure and defaults are identical.
CompoundTask make_latent_manipulation(const WireType& x, const WireType& a,
                                      const WireType& lat, const WireType& c,
                                      const LatentSpaces& sp, PutStyle style,
                                      const ManipulationDists& dists,
                                      Divergence attr_div, Divergence image_div,
                                      const ManipulationOptions& opts = {});

// Container laws for psh: (S, X) -> S and pop: S -> (S, X) over a trainable
// empty container:
//   PshPop  pop(psh(s, x)) = (s, x)    on (container, item) pairs
//   Empty   pop(bot) = (bot, 0)
CompoundTask make_stack(const WireType& s, const WireType& x,
                           const std::string& psh, const std::string& pop,
                           const std::string& bot, const std::string& dist,
                           Divergence div, double w_pshpop = 1.0,
                           double w_empty = 1.0);

} // namespace taskforge
