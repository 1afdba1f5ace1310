#include "taskforge/objective.hpp"

#include <cmath>

#include "taskforge/errors.hpp"
#include "taskforge/evaluate.hpp"

namespace taskforge {

namespace {

void check_atom_params(const AtomicTask& atom, const Diagram& d,
                       const ParamStore& params) {
  for (const Box& b : d.nodes) {
    if (b.kind == BoxKind::Learner) {
      if (!params.has(b.param))
        fail("UnknownParamSpace", "atom '" + atom.name + "': learner '" + b.id +
                                      "' uses undeclared space '" + b.param + "'");
      const auto* mlp = std::get_if<MlpLayout>(&params.layout(b.param));
      if (!mlp)
        fail("BadParamLayout", "atom '" + atom.name + "': space '" + b.param +
                                   "' is not a network layout");
      int in = 0, out = 0;
      for (auto& t : b.ins) in += t.dim;
      for (auto& t : b.outs) out += t.dim;
      if (mlp->in_dim() != in || mlp->out_dim() != out)
        fail("LayoutMismatch",
             "atom '" + atom.name + "': learner '" + b.id + "' needs " +
                 std::to_string(in) + " -> " + std::to_string(out) +
                 " but space '" + b.param + "' is " +
                 std::to_string(mlp->in_dim()) + " -> " +
                 std::to_string(mlp->out_dim()));
    } else if (b.kind == BoxKind::Const && !b.param.empty()) {
      if (!params.has(b.param))
        fail("UnknownParamSpace", "atom '" + atom.name + "': constant '" + b.id +
                                      "' uses undeclared space '" + b.param + "'");
      const auto* vec = std::get_if<VectorLayout>(&params.layout(b.param));
      if (!vec || vec->n != b.outs[0].dim)
        fail("BadParamLayout", "atom '" + atom.name + "': space '" + b.param +
                                   "' must be a vector of size " +
                                   std::to_string(b.outs[0].dim));
    }
  }
}

} // namespace

Objective compile_objective(const CompoundTask& task, const ParamStore& params,
                            const DistRegistry& dists,
                            const ObjectiveOptions& opts) {
  if (task.atoms.empty()) fail("BadConfig", "task '" + task.name + "' has no atoms");

  for (const AtomicTask& atom : task.atoms) {
    // Distribution agreement with the input interface.
    if (!atom.dist.empty()) {
      if (!dists.has(atom.dist))
        fail("UnknownDist", "atom '" + atom.name + "': distribution '" +
                                atom.dist + "' is not registered");
      auto types = dists.get(atom.dist).types();
      if (types != atom.sys.inputs)
        fail("TypeMismatch", "atom '" + atom.name + "': distribution '" +
                                 atom.dist +
                                 "' does not produce the atom's input interface");
    }
    // Internal state boxes must reference registered distributions too.
    for (const Diagram* d : {&atom.sys, &atom.spec})
      for (const Box& b : d->nodes)
        if (b.kind == BoxKind::State && !dists.has(b.dist))
          fail("UnknownDist", "atom '" + atom.name + "': state box '" + b.id +
                                  "' uses unregistered distribution '" + b.dist +
                                  "'");
    check_atom_params(atom, atom.sys, params);
    check_atom_params(atom, atom.spec, params);
    for (const std::string& space : atom.trainable)
      if (!params.has(space))
        fail("UnknownParamSpace", "atom '" + atom.name +
                                      "': trainable space '" + space +
                                      "' is not declared");
  }

  Objective obj;
  obj.task = task;
  obj.entropy_bonus = opts.entropy_bonus;
  for (auto& [name, w] : opts.entropy_bonus)
    if (!task.has_atom(name))
      fail("UnknownAtom", "entropy bonus names unknown atom '" + name + "'");

  if (opts.alternating.empty()) {
    std::vector<int> all;
    for (int i = 0; i < static_cast<int>(task.atoms.size()); ++i) all.push_back(i);
    obj.groups.push_back(std::move(all));
  } else {
    std::set<int> seen;
    for (auto& group : opts.alternating) {
      if (group.empty()) fail("BadConfig", "empty step group");
      std::vector<int> idx;
      for (auto& name : group) {
        if (!task.has_atom(name))
          fail("UnknownAtom", "step group names unknown atom '" + name + "'");
        for (int i = 0; i < static_cast<int>(task.atoms.size()); ++i)
          if (task.atoms[static_cast<std::size_t>(i)].name == name) {
            if (!seen.insert(i).second)
              fail("SharedAtom", "atom '" + name +
                                     "' appears in more than one step group");
            idx.push_back(i);
          }
      }
      obj.groups.push_back(std::move(idx));
    }
    if (static_cast<int>(seen.size()) != static_cast<int>(task.atoms.size()))
      fail("BadConfig", "alternating groups must cover every atom");
  }
  return obj;
}

NodeId objective_forward(Tape& tape, const Objective& obj, int group, int batch,
                         Rng& rng, const EvalContext& ctx,
                         std::map<std::string, double>* atom_losses) {
  if (group < 0 || group >= static_cast<int>(obj.groups.size()))
    fail("BadConfig", "step group out of range");
  if (batch < 1) fail("BadConfig", "batch must be at least 1");

  std::vector<NodeId> terms;
  std::vector<float> weights;
  for (int ai : obj.groups[static_cast<std::size_t>(group)]) {
    const AtomicTask& atom = obj.task.atoms[static_cast<std::size_t>(ai)];

    std::vector<NodeId> in_nodes;
    if (!atom.dist.empty()) {
      auto draws = ctx.dists->get(atom.dist).sample(batch, rng, ctx);
      for (auto& x : draws) in_nodes.push_back(tape.leaf(std::move(x)));
    }

    EvalOptions eo;
    eo.trainable = &atom.trainable;
    eo.batch = batch;
    auto sys_out = evaluate_nodes(tape, atom.sys, in_nodes, rng, ctx, eo);
    auto spec_out = evaluate_nodes(tape, atom.spec, in_nodes, rng, ctx, eo);

    NodeId per_sample = -1;
    for (std::size_t j = 0; j < sys_out.size(); ++j) {
      NodeId dj = divergence_apply(tape, atom.div, sys_out[j], spec_out[j]);
      per_sample = per_sample < 0 ? dj : tape.add(per_sample, dj);
    }
    NodeId mean = tape.mean_batch(per_sample);
    if (atom_losses)
      (*atom_losses)[atom.name] = double(tape.value(mean).at(0, 0));
    terms.push_back(mean);
    weights.push_back(static_cast<float>(atom.weight));

    auto eb = obj.entropy_bonus.find(atom.name);
    if (eb != obj.entropy_bonus.end()) {
      terms.push_back(tape.entropy_reg(sys_out[0]));
      weights.push_back(eb->second);
    }
  }
  return tape.wsum(terms, weights);
}

StepReport objective_step(const Objective& obj, int group, int batch, Rng& rng,
                          ParamStore& params, const DistRegistry& dists,
                          AdamW& opt) {
  Tape tape;
  EvalContext ctx{&params, &dists};
  StepReport rep;
  NodeId loss = objective_forward(tape, obj, group, batch, rng, ctx,
                                  &rep.atom_loss);
  rep.total = double(tape.value(loss).at(0, 0));
  if (!std::isfinite(rep.total))
    fail("NonFiniteLoss", "loss became non-finite");
  tape.backward(loss);
  opt.step(params, tape.param_grads());
  return rep;
}

} // namespace taskforge
