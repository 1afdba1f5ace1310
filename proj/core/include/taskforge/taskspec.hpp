#pragma once

#include <map>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "taskforge/rewrite.hpp"
#include "taskforge/trainer.hpp"

namespace taskforge {

// JSON task-spec front end. A spec file bundles everything one run needs:
//
// {
//   "name": "sprites-colour",
//   "types": { "img": {"dim": 768, "kind": "unit"}, ... },
//   "layouts": {
//     "enc": {"dims": [768, 256, 32], "acts": ["leaky_relu", "linear"]},
//     "bot": {"vector": 64}
//   },
//   "distributions": { "x": <dist>, ... },
//   "task": <task>,
//   "drop":   ["Classify"],          (optional: remove atoms by name)
//   "freeze": ["get"],               (optional: strip spaces from trainable sets)
//   "objective": {                   (optional overrides + schedule)
//     "divergences": {"PutGet": <div>}, "weights": {"Reconstruct": 100},
//     "excluded": ["dsc"],
//     "alternating": [["True","Fake"], ["Fool"]],
//     "entropy_bonus": {"Fool": 0.1}
//   },
//   "train": {"steps": 20000, "batch": 128, "seed": 0, "log_every": 100,
//             "lr": 1e-3, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8,
//             "weight_decay": 1e-2, "clip": 1, "out": "runs/sprites",
//             "init_from": ""},
//   "eval":  {"batch": 512, "seed": 1, "dists": {"Classify": "test"}},
//   "stack_eval": {"enc": "enc", "dec": "dec", "psh": "psh", "pop": "pop",
//                  "bot": "bot", "images": "x"}
// }
//
// Wire types are written inline ({"name","dim","kind"}) or as a string
// naming an entry of "types"; kinds are real | nonneg | onehot | unit.
//
// Divergences are a primitive name ("l2" | "l1" | "bce" | "ce" | "klgauss" |
// "ssim") or a weighted list [["l2", 1.0], ["l1", 0.25]].
//
// Diagrams are written as
//   {"inputs": [<type>...], "outputs": [<type>...],
//    "nodes": [{"id": "f", "kind": "learner", "param": "enc",
//               "ins": [<type>...], "outs": [<type>...]},
//              {"id": "s", "kind": "fixed", "fn": "add", "args": [],
//               "ins": [...], "outs": [...]},
//              {"id": "c", "kind": "copy", "type": <type>},
//              {"id": "d", "kind": "delete", "type": <type>},
//              {"id": "w", "kind": "swap", "a": <type>, "b": <type>},
//              {"id": "z", "kind": "state", "dist": "noise", "outs": [...]},
//              {"id": "k", "kind": "const", "type": <type>, "value": 0.5,
//               "param": "seed"}],
//    "edges": [["$in", 0, "f", 0], ["f", 0, "$out", 0], ...]}
// where "$in"/"$out" name the interface, "value" is a number (broadcast) or
// an array of type dim, and a non-empty "param" makes the constant trainable.
//
// Distributions are tagged by "kind":
//   {"kind": "unit"}
//   {"kind": "gaussian", "type": T, "mu": 0, "sigma": 1}
//   {"kind": "onehot", "type": T}
//   {"kind": "clamped_uniform", "type": T, "lo": -0.1, "hi": 1.1,
//    "clamp_lo": 0, "clamp_hi": 1}
//   {"kind": "attribute", "type": T, "classes": 3, "fixed": -1}
//   {"kind": "table", "types": [T...], "rows": [[<vec>,...],...],
//    "repeats": [1, 2, ...]}                   (optional row multiplicities)
//   {"kind": "mnist", "images": "path", "labels": "path", "skip": 0,
//    "take": -1, "fields": ["image", "label"]}
//   {"kind": "sprites", "size": 16, "salt": 0,
//    "fields": ["image", "shape", "hue", "cs", "bc"]}
//   {"kind": "projection", "of": "base", "comps": [0]}
//   {"kind": "product", "of": ["a", "b", ...]}
//   {"kind": "pushforward", "of": "base", "via": <diagram>}
//   {"kind": "stack", "item": "latents", "push": <diagram>, "base": "bot",
//    "container": T, "max_depth": 4}
// Entries may reference each other by name in any order (cycles are
// rejected).
//
// Tasks are pattern instantiations, raw atom lists, or compositions:
//   {"pattern": "classification", "x": T, "y": T, "cls": "get",
//    "dist": "labelled", "div": <div>, "weight": 1}
//   {"pattern": "autoencoding", "x": T, "lat": T, "enc": "enc", "dec": "dec",
//    "dist": "x", "div": <div>, "weight": 100}
//   {"pattern": "gan", "x": T, "code": T, "gen": "gen", "dsc": "dsc",
//    "data_dist": "x", "code_dist": "z", "div": "bce", "weight": 1}
//   {"pattern": "vae", "x": T, "lat": T, "enc": "enc", "dec": "dec",
//    "dist": "x", "recon_div": <div>, "recon_weight": 1, "norm_weight": 1}
//   {"pattern": "cyclegan", "x": T, "y": T, "f": "f", "g": "g", "dx": "dx",
//    "dy": "dy", "x_dist": "xs", "y_dist": "ys", "gan_div": "bce",
//    "cycle_div": <div>, "gan_weight": 1, "cycle_weight": 1}
//   {"pattern": "energy", "x": T, "lat": T, "enc": "enc", "dec": "dec",
//    "gamma": 1.0, "dist": "x", "code_extracting": true,
//    "e_enc": "sqdist", "e_dec": "sqdist"}
//   {"pattern": "manipulation" | "strong_manipulation", "x": T, "a": T,
//    "put": "put", "get": "get",
//    "dists": {"labelled": "...", "image": "...", "image_attr": "...",
//              "image_attr2": "..."},
//    "attr_div": <div>, "image_div": <div>, "options": <options>}
//   {"pattern": "complement_manipulation", ..., "c": T, "seed": "seedc"}
//   {"pattern": "latent_manipulation", "x": T, "a": T, "lat": T, "c": T?,
//    "spaces": {"enc": "enc", "dec": "dec", "get": "get_s", "put": "put_s",
//               "seed": "seedc"?},
//    "style": "linear_offset" | "latent_net", "dists": {...},
//    "attr_div": <div>, "image_div": <div>, "options": <options>}
//   {"pattern": "stack", "s": T, "x": T, "psh": "psh", "pop": "pop",
//    "bot": "bot", "dist": "pairs", "div": <div>, "w_pshpop": 1,
//    "w_empty": 1}
//   {"atoms": [{"name": "Law", "sys": <diagram>, "spec": <diagram>,
//               "dist": "x", "trainable": ["f"], "div": <div>?,
//               "weight": 1}], "name": "raw"}
//   {"combine": [<task>...], "name": "both"}
//   {"specialise": <task>, "space": "put", "impl": <diagram>}
// Any task node may carry "prefix": "shape/" to namespace its atom names.
// Manipulation options: {"strong": false, "putput": false, "undo": true,
// "dsc": "dsc", "w_classify": 1, "w_putget": 1, "w_getput": 1, "w_putput": 1,
// "w_undo": 1, "w_gan": 1}.
//
// A raw atom may omit "div" only when "objective.divergences" covers it
// (UncoveredAtom otherwise). Objective weights must be positive
// (NonPositiveWeight) and name existing atoms (UnknownAtom).
struct TaskBundle {
  std::string name;
  std::map<std::string, WireType> types;
  CompoundTask task;
  DistRegistry dists;
  std::map<std::string, ParamLayout> layouts;
  ObjectiveOptions objective;
  RunConfig run;

  // Held-out evaluation settings.
  std::map<std::string, std::string> eval_dists;
  int eval_batch = 512;
  std::uint64_t eval_seed = 1;

  bool has_stack_eval = false;
  StackEvalConfig stack;
};

TaskBundle load_task_bundle(const std::string& path);
// `base_dir` anchors relative data paths inside the spec (mnist files).
TaskBundle parse_task_bundle(const nlohmann::json& j,
                             const std::string& base_dir);

// Reusable pieces of the grammar.
WireType parse_wire_type(const nlohmann::json& j,
                         const std::map<std::string, WireType>& named);
Divergence parse_divergence(const nlohmann::json& j);
Diagram parse_diagram(const nlohmann::json& j,
                      const std::map<std::string, WireType>& named);
ParamLayout parse_layout(const nlohmann::json& j);

// Proof scripts:
// {
//   "name": "energy-to-reconstruction",
//   "types": {...},                      (optional named wire types)
//   "source": <task> | [<equation>...],
//   "target": <task> | [<equation>...],
//   "steps": [
//     {"rule": "copy_through", "eq": 0, "site": "enc", "on_rhs": false,
//      "backward": false},
//     {"rule": "lincomb_split", "eq": 0},
//     {"rule": "lincomb_split", "eq": 0, "backward": true, "eq2": 1,
//      "w1": 1.0, "w2": 1.0},
//     {"rule": "positivity_collapse", "eq": 0},
//     {"rule": "positivity_collapse", "eq": 0, "backward": true,
//      "fn": "sqdist"},
//     {"rule": "postcompose", "eq": 0, "post": <diagram>}
//   ]
// }
// An inline equation is {"name", "lhs": <diagram>, "rhs": <diagram>,
// "dist": "", "trainable": [...]}; a <task> contributes its atoms read as
// equations.
ProofScript parse_proof_script(const nlohmann::json& j,
                               const std::string& base_dir);
ProofScript load_proof_script(const std::string& path);

} // namespace taskforge
