#include "taskforge/evaluate.hpp"

#include <utility>

#include "taskforge/errors.hpp"
#include "taskforge/fixedfn.hpp"

namespace taskforge {

namespace {

int sum_dims(const std::vector<WireType>& ts) {
  int n = 0;
  for (auto& t : ts) n += t.dim;
  return n;
}

} // namespace

std::vector<NodeId> evaluate_nodes(Tape& tape, const Diagram& d,
                                   const std::vector<NodeId>& inputs, Rng& rng,
                                   const EvalContext& ctx,
                                   const EvalOptions& opts) {
  if (inputs.size() != d.inputs.size())
    fail("BadInputCount", "diagram expects " + std::to_string(d.inputs.size()) +
                              " inputs, got " + std::to_string(inputs.size()));

  int batch = -1;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor& v = tape.value(inputs[i]);
    if (v.cols() != d.inputs[i].dim)
      fail("BadInputDim", "input " + std::to_string(i) + " has " +
                              std::to_string(v.cols()) + " columns, type needs " +
                              std::to_string(d.inputs[i].dim));
    if (batch >= 0 && v.rows() != batch)
      fail("BatchMismatch", "inputs disagree on batch size");
    batch = v.rows();
  }
  if (batch < 0) batch = opts.batch;

  Wiring wiring(d);
  std::map<std::pair<std::string, int>, NodeId> made;
  auto produced = [&](const PortRef& p) -> NodeId {
    if (p.node == kIn) return inputs[static_cast<std::size_t>(p.port)];
    return made.at({p.node, p.port});
  };

  // One tape leaf per (space, trainability). Masked spaces load as plain
  // constants, so their gradients are exactly absent while gradients still
  // pass through the boxes that read them.
  std::map<std::pair<std::string, bool>, NodeId> space_leaves;
  auto param_node = [&](const std::string& space) -> NodeId {
    if (!ctx.params || !ctx.params->has(space))
      fail("UnknownParamSpace", "parameter space '" + space + "' not declared");
    bool train = !opts.trainable || opts.trainable->count(space) > 0;
    auto key = std::make_pair(space, train);
    auto it = space_leaves.find(key);
    if (it != space_leaves.end()) return it->second;
    NodeId n = train ? tape.param_leaf(space, ctx.params->flat(space))
                     : tape.leaf(ctx.params->flat(space));
    space_leaves[key] = n;
    return n;
  };

  auto need_batch = [&]() {
    if (batch < 1)
      fail("MissingBatch", "diagram has no inputs; set EvalOptions::batch");
  };

  for (int idx : topo_order(d)) {
    const Box& b = d.nodes[static_cast<std::size_t>(idx)];
    std::vector<NodeId> ins;
    for (std::size_t j = 0; j < b.ins.size(); ++j)
      ins.push_back(produced(wiring.producer({b.id, static_cast<int>(j)})));

    switch (b.kind) {
      case BoxKind::Learner: {
        const ParamLayout& pl = ctx.params->layout(b.param);
        const auto* mlp = std::get_if<MlpLayout>(&pl);
        if (!mlp)
          fail("BadParamLayout", "learner '" + b.id + "' needs a network layout");
        if (mlp->in_dim() != sum_dims(b.ins) || mlp->out_dim() != sum_dims(b.outs))
          fail("LayoutMismatch", "learner '" + b.id + "' interface (" +
                                     std::to_string(sum_dims(b.ins)) + " -> " +
                                     std::to_string(sum_dims(b.outs)) +
                                     ") does not match layout (" +
                                     std::to_string(mlp->in_dim()) + " -> " +
                                     std::to_string(mlp->out_dim()) + ")");
        if (ins.empty())
          fail("BadLearnerArity", "learner '" + b.id + "' has no inputs");
        NodeId x = ins.size() == 1 ? ins[0] : tape.concat(ins);
        NodeId y = mlp_forward(tape, x, param_node(b.param), *mlp);
        int off = 0;
        for (std::size_t j = 0; j < b.outs.size(); ++j) {
          int next = off + b.outs[j].dim;
          NodeId part = b.outs.size() == 1 ? y : tape.slice(y, off, next);
          made[{b.id, static_cast<int>(j)}] = part;
          off = next;
        }
        break;
      }
      case BoxKind::Fixed: {
        auto outs = fixed_eval(tape, b, ins, rng);
        for (std::size_t j = 0; j < outs.size(); ++j)
          made[{b.id, static_cast<int>(j)}] = outs[j];
        break;
      }
      case BoxKind::Copy:
        made[{b.id, 0}] = ins[0];
        made[{b.id, 1}] = ins[0];
        break;
      case BoxKind::Delete:
        break;
      case BoxKind::Swap:
        made[{b.id, 0}] = ins[1];
        made[{b.id, 1}] = ins[0];
        break;
      case BoxKind::State: {
        if (!ctx.dists)
          fail("MissingRegistry", "state box '" + b.id + "' needs a registry");
        need_batch();
        const Sampler& s = ctx.dists->get(b.dist);
        auto ts = s.types();
        if (ts.size() != b.outs.size())
          fail("DistArity", "state box '" + b.id + "' arity differs from '" +
                                b.dist + "'");
        for (std::size_t j = 0; j < ts.size(); ++j)
          if (ts[j] != b.outs[j])
            fail("DistType", "state box '" + b.id + "' output " +
                                 std::to_string(j) + " type differs from '" +
                                 b.dist + "'");
        auto draws = s.sample(batch, rng, ctx);
        for (std::size_t j = 0; j < draws.size(); ++j) {
          if (draws[j].rows() != batch || draws[j].cols() != b.outs[j].dim)
            fail("DistShape", "distribution '" + b.dist + "' returned a bad shape");
          made[{b.id, static_cast<int>(j)}] = tape.leaf(std::move(draws[j]));
        }
        break;
      }
      case BoxKind::Const: {
        need_batch();
        int dim = b.outs[0].dim;
        if (!b.param.empty()) {
          const ParamLayout& pl = ctx.params->layout(b.param);
          const auto* vec = std::get_if<VectorLayout>(&pl);
          if (!vec || vec->n != dim)
            fail("BadParamLayout", "constant '" + b.id +
                                       "' needs a vector space of size " +
                                       std::to_string(dim));
          made[{b.id, 0}] = tape.broadcast_param(param_node(b.param), 0, dim, batch);
        } else {
          Tensor v = Tensor::zeros({batch, dim});
          for (int r = 0; r < batch; ++r)
            for (int c = 0; c < dim; ++c)
              v.at(r, c) = b.value[static_cast<std::size_t>(c)];
          made[{b.id, 0}] = tape.leaf(std::move(v));
        }
        break;
      }
    }
  }

  std::vector<NodeId> outs;
  for (std::size_t j = 0; j < d.outputs.size(); ++j)
    outs.push_back(produced(wiring.producer({kOut, static_cast<int>(j)})));
  return outs;
}

std::vector<Tensor> evaluate(const Diagram& d, const std::vector<Tensor>& inputs,
                             const ParamStore& params, Rng& rng,
                             const DistRegistry* dists, const EvalOptions& opts) {
  validate_or_throw(d);
  Tape tape;
  std::vector<NodeId> in_nodes;
  for (auto& x : inputs) in_nodes.push_back(tape.leaf(x));
  EvalContext ctx{&params, dists};
  auto out_nodes = evaluate_nodes(tape, d, in_nodes, rng, ctx, opts);
  std::vector<Tensor> out;
  for (NodeId n : out_nodes) out.push_back(tape.value(n));
  return out;
}

} // namespace taskforge
