#include "taskforge/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "taskforge/errors.hpp"
#include "taskforge/evaluate.hpp"

namespace taskforge {

namespace {

int argmax_row(const Tensor& t, int row) {
  int best = 0;
  for (int i = 1; i < t.cols(); ++i)
    if (t.at(row, i) > t.at(row, best)) best = i;
  return best;
}

void append_rows(std::vector<MetricRow>& out, std::int64_t step,
                 const StepReport& rep, const CompoundTask& task) {
  // Task order, not map order, so the log reads like the task definition.
  for (const AtomicTask& a : task.atoms) {
    auto it = rep.atom_loss.find(a.name);
    if (it != rep.atom_loss.end()) out.push_back({step, a.name, it->second});
  }
  out.push_back({step, "total", rep.total});
}

} // namespace

TrainResult train(const CompoundTask& task,
                  const std::map<std::string, ParamLayout>& layouts,
                  const DistRegistry& dists, const ObjectiveOptions& opts,
                  const RunConfig& cfg) {
  if (cfg.steps < 0) fail("BadConfig", "steps must be >= 0");
  if (cfg.log_every < 1) fail("BadConfig", "log_every must be >= 1");

  ParamStore params;
  for (auto& [name, lay] : layouts) params.declare(name, lay);
  for (const std::string& s : task_spaces(task))
    if (!params.has(s))
      fail("ParamMismatch", "space '" + s + "' has no declared layout");
  params.init(cfg.seed);

  if (!cfg.init_from.empty()) {
    Checkpoint warm = load_checkpoint(cfg.init_from);
    for (const std::string& s : warm.params.spaces()) {
      if (!params.has(s)) continue; // extra spaces in the warm start are fine
      const Tensor& src = warm.params.flat(s);
      Tensor& dst = params.flat(s);
      if (src.size() != dst.size())
        fail("ParamMismatch", "warm start space '" + s + "' has " +
                                  std::to_string(src.size()) +
                                  " parameters, layout expects " +
                                  std::to_string(dst.size()));
      dst = src;
    }
  }

  Objective obj = compile_objective(task, params, dists, opts);
  AdamW adam(cfg.optim);
  Rng rng(cfg.seed);

  TrainResult res;
  int n_groups = static_cast<int>(obj.groups.size());
  for (std::int64_t s = 0; s < cfg.steps; ++s) {
    int g = static_cast<int>(s % n_groups);
    StepReport rep;
    try {
      rep = objective_step(obj, g, cfg.batch, rng, params, dists, adam);
    } catch (const Error& e) {
      if (e.code() == "NonFiniteLoss")
        fail("NonFiniteLoss", "aborted at step " + std::to_string(s) +
                                  " (group " + std::to_string(g) + "): " +
                                  e.what());
      throw;
    }
    if (s % cfg.log_every == 0 || s == cfg.steps - 1)
      append_rows(res.metrics, s, rep, task);
  }

  res.checkpoint.seed = cfg.seed;
  res.checkpoint.step = cfg.steps;
  res.checkpoint.params = std::move(params);

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    res.metrics_path = cfg.out_dir + "/metrics.csv";
    write_metrics_csv(res.metrics_path, res.metrics);
    res.checkpoint_dir = cfg.out_dir + "/checkpoint";
    save_checkpoint(res.checkpoint_dir, res.checkpoint);
  }
  return res;
}

std::string metrics_to_csv(const std::vector<MetricRow>& rows) {
  std::string out = "step,atom,loss\n";
  char buf[64];
  for (const MetricRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%s,%.17g\n",
                  static_cast<long long>(r.step), r.atom.c_str(), r.loss);
    out += buf;
  }
  return out;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail("IoError", "cannot write '" + path + "'");
  f << metrics_to_csv(rows);
  if (!f.good()) fail("IoError", "short write to '" + path + "'");
}

LawReport eval_laws(const CompoundTask& task, const ParamStore& params,
                    const DistRegistry& dists, const ObjectiveOptions& opts,
                    int batch, std::uint64_t seed,
                    const std::map<std::string, std::string>& dist_override) {
  for (const std::string& s : task_spaces(task))
    if (!params.has(s))
      fail("ParamMismatch", "space '" + s + "' is not in the parameter store");
  Objective obj = compile_objective(task, params, dists, opts);
  for (auto& [atom, dname] : dist_override) {
    if (!task.has_atom(atom))
      fail("UnknownAtom", "dist override names unknown atom '" + atom + "'");
    if (!dists.has(dname))
      fail("UnknownDist", "dist override '" + dname + "' is not registered");
    if (dists.get(dname).types() != task.atom(atom).sys.inputs)
      fail("TypeMismatch", "override '" + dname +
                               "' does not produce the inputs of atom '" +
                               atom + "'");
  }

  // Mirrors the training forward pass draw for draw, so the weighted rows
  // recompose to the training loss on the same seed.
  Rng rng(seed);
  EvalContext ctx{&params, &dists};
  Tape tape;
  LawReport rep;
  for (const auto& group : obj.groups) {
    for (int ai : group) {
      const AtomicTask& atom = obj.task.atoms[static_cast<std::size_t>(ai)];
      auto ov = dist_override.find(atom.name);
      const std::string& dname =
          ov == dist_override.end() ? atom.dist : ov->second;

      std::vector<NodeId> in_nodes;
      if (!dname.empty()) {
        auto draws = dists.get(dname).sample(batch, rng, ctx);
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

      LawRow row;
      row.atom = atom.name;
      row.mean_divergence = double(tape.value(mean).at(0, 0));
      row.weight = atom.weight;
      row.batch = batch;
      if (sys_out.size() == 1) {
        const WireType& ot = atom.sys.outputs[0];
        const Tensor& u = tape.value(sys_out[0]);
        const Tensor& v = tape.value(spec_out[0]);
        if (ot.kind == WireKind::OneHot && ot.dim > 1) {
          int hit = 0;
          for (int b = 0; b < batch; ++b)
            if (argmax_row(u, b) == argmax_row(v, b)) ++hit;
          row.accuracy = double(hit) / double(batch);
        } else if (ot.dim == 1 && ot.kind != WireKind::Nonneg) {
          int hit = 0;
          for (int b = 0; b < batch; ++b)
            if (std::fabs(double(u.at(b, 0)) - double(v.at(b, 0))) <= 0.1)
              ++hit;
          row.accuracy = double(hit) / double(batch);
        }
      }
      rep.total += row.weight * row.mean_divergence;

      auto eb = obj.entropy_bonus.find(atom.name);
      if (eb != obj.entropy_bonus.end())
        rep.total += double(eb->second) *
                     double(tape.value(tape.entropy_reg(sys_out[0])).at(0, 0));
      rep.rows.push_back(std::move(row));
    }
  }
  return rep;
}

LawReport eval_laws(const Checkpoint& ckpt, const CompoundTask& task,
                    const DistRegistry& dists, const ObjectiveOptions& opts,
                    int batch, std::uint64_t seed,
                    const std::map<std::string, std::string>& dist_override) {
  return eval_laws(task, ckpt.params, dists, opts, batch, seed, dist_override);
}

// --- container probing --------------------------------------------------------

namespace {

const MlpLayout& mlp_layout_of(const ParamStore& params,
                               const std::string& space) {
  if (!params.has(space))
    fail("ParamMismatch", "space '" + space + "' is not in the parameter store");
  const auto* m = std::get_if<MlpLayout>(&params.layout(space));
  if (!m) fail("BadParamLayout", "space '" + space + "' is not a network");
  return *m;
}

Tensor hconcat(const Tensor& a, const Tensor& b) {
  Tensor out({a.rows(), a.cols() + b.cols()});
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) out.at(r, c) = a.at(r, c);
    for (int c = 0; c < b.cols(); ++c) out.at(r, a.cols() + c) = b.at(r, c);
  }
  return out;
}

Tensor cols_of(const Tensor& t, int lo, int hi) {
  Tensor out({t.rows(), hi - lo});
  for (int r = 0; r < t.rows(); ++r)
    for (int c = lo; c < hi; ++c) out.at(r, c - lo) = t.at(r, c);
  return out;
}

} // namespace

std::vector<StackDepthReport> stack_eval(const ParamStore& params,
                                         const DistRegistry& dists,
                                         const StackEvalConfig& cfg,
                                         const std::vector<int>& depths,
                                         int batch, std::uint64_t seed) {
  if (batch < 1) fail("BadConfig", "batch must be at least 1");
  const MlpLayout& enc = mlp_layout_of(params, cfg.enc);
  const MlpLayout& dec = mlp_layout_of(params, cfg.dec);
  const MlpLayout& psh = mlp_layout_of(params, cfg.psh);
  const MlpLayout& pop = mlp_layout_of(params, cfg.pop);
  if (!params.has(cfg.bot))
    fail("ParamMismatch", "space '" + cfg.bot + "' is not in the parameter store");
  const auto* botl = std::get_if<VectorLayout>(&params.layout(cfg.bot));
  if (!botl) fail("BadParamLayout", "space '" + cfg.bot + "' is not a vector");

  const int S = botl->n;
  const int LAT = pop.out_dim() - S;
  if (LAT < 1 || psh.in_dim() != S + LAT || psh.out_dim() != S ||
      pop.in_dim() != S || enc.out_dim() != LAT || dec.in_dim() != LAT ||
      enc.in_dim() != dec.out_dim())
    fail("BadParamLayout", "stack spaces do not agree on (S, LAT) shapes");
  const int capacity = S / LAT;

  if (!dists.has(cfg.image_dist))
    fail("UnknownDist", "distribution '" + cfg.image_dist + "' is not registered");
  const Sampler& images = dists.get(cfg.image_dist);
  if (images.types().size() != 1 || images.types()[0].dim != enc.in_dim())
    fail("TypeMismatch", "distribution '" + cfg.image_dist +
                             "' must produce one image component of dim " +
                             std::to_string(enc.in_dim()));

  const Tensor& bot_flat = params.flat(cfg.bot);
  Rng rng(seed);
  EvalContext ctx{&params, &dists};

  std::vector<StackDepthReport> out;
  for (int depth : depths) {
    if (depth < 0) fail("BadConfig", "depth must be >= 0");
    StackDepthReport row;
    row.depth = depth;
    row.beyond_capacity = depth > capacity;

    if (depth == 0) {
      // Empty-container residual |pop(bot) - (bot, 0)|^2, the trained Empty
      // loss under the squared-distance convention (summed over the wire).
      Tensor s({1, S});
      for (int i = 0; i < S; ++i) s.at(0, i) = bot_flat.at(0, i);
      Tensor popped = mlp_forward_raw(s, params.flat(cfg.pop), pop);
      double res = 0.0;
      for (int i = 0; i < S; ++i) {
        double e = double(popped.at(0, i)) - double(bot_flat.at(0, i));
        res += e * e;
      }
      for (int i = 0; i < LAT; ++i) {
        double e = double(popped.at(0, S + i));
        res += e * e;
      }
      row.mean_mse = res;
      out.push_back(std::move(row));
      continue;
    }

    std::vector<Tensor> imgs;
    Tensor s({batch, S});
    for (int r = 0; r < batch; ++r)
      for (int i = 0; i < S; ++i) s.at(r, i) = bot_flat.at(0, i);
    for (int i = 0; i < depth; ++i) {
      imgs.push_back(images.sample(batch, rng, ctx)[0]);
      Tensor z = mlp_forward_raw(imgs.back(), params.flat(cfg.enc), enc);
      s = mlp_forward_raw(hconcat(s, z), params.flat(cfg.psh), psh);
    }
    for (int j = 0; j < depth; ++j) {
      Tensor popped = mlp_forward_raw(s, params.flat(cfg.pop), pop);
      s = cols_of(popped, 0, S);
      Tensor img = mlp_forward_raw(cols_of(popped, S, S + LAT),
                                   params.flat(cfg.dec), dec);
      const Tensor& orig = imgs[static_cast<std::size_t>(depth - 1 - j)];
      double se = 0.0;
      for (int r = 0; r < batch; ++r)
        for (int c = 0; c < img.cols(); ++c) {
          double e = double(img.at(r, c)) - double(orig.at(r, c));
          se += e * e;
        }
      row.slot_mse.push_back(se / (double(batch) * double(img.cols())));
    }
    for (double m : row.slot_mse) row.mean_mse += m;
    row.mean_mse /= double(row.slot_mse.size());
    out.push_back(std::move(row));
  }
  return out;
}

// --- exact finite-domain probing ------------------------------------------------

std::vector<int> tabulate_put(const Diagram& put, const ParamStore& params,
                              const DistRegistry& dists, int nd, int na) {
  if (put.inputs.size() != 2 || put.inputs[0].dim != nd ||
      put.inputs[1].dim != na || put.outputs.size() != 1 ||
      put.outputs[0].dim != nd)
    fail("TypeMismatch", "editor must map (d, a) of dims (" +
                             std::to_string(nd) + ", " + std::to_string(na) +
                             ") to one d output");
  Tensor d_in({nd * na, nd}), a_in({nd * na, na});
  for (int d = 0; d < nd; ++d)
    for (int a = 0; a < na; ++a) {
      d_in.at(d * na + a, d) = 1.0f;
      a_in.at(d * na + a, a) = 1.0f;
    }
  Rng rng(0);
  auto outs = evaluate(put, {std::move(d_in), std::move(a_in)}, params, rng,
                       &dists);
  std::vector<int> table(static_cast<std::size_t>(nd * na));
  for (int r = 0; r < nd * na; ++r)
    table[static_cast<std::size_t>(r)] = argmax_row(outs[0], r);
  return table;
}

std::vector<int> tabulate_get(const Diagram& get, const ParamStore& params,
                              const DistRegistry& dists, int nd, int na) {
  if (get.inputs.size() != 1 || get.inputs[0].dim != nd ||
      get.outputs.size() != 1 || get.outputs[0].dim != na)
    fail("TypeMismatch", "reader must map one d wire of dim " +
                             std::to_string(nd) + " to one a wire of dim " +
                             std::to_string(na));
  Tensor d_in({nd, nd});
  for (int d = 0; d < nd; ++d) d_in.at(d, d) = 1.0f;
  Rng rng(0);
  auto outs = evaluate(get, {std::move(d_in)}, params, rng, &dists);
  std::vector<int> table(static_cast<std::size_t>(nd));
  for (int d = 0; d < nd; ++d)
    table[static_cast<std::size_t>(d)] = argmax_row(outs[0], d);
  return table;
}

BayesCheck check_bayes_inversion(const FiniteManipulator& m,
                                 const JointFiniteDist& joint, double tol) {
  if (m.d_support != joint.d_support || m.a_support != joint.a_support)
    fail("BadConfig", "manipulator and joint must share supports");
  BayesKernel kernel = bayes_invert(joint);
  BayesCheck out;
  for (int a = 0; a < joint.a_count(); ++a) {
    FiniteDist pushed = put_pushforward(m, a);
    FiniteDist cond = kernel.dist_given(a);
    out.tv.push_back(total_variation(pushed, cond));
  }
  out.max_tv = *std::max_element(out.tv.begin(), out.tv.end());
  out.pass = out.max_tv <= tol;
  return out;
}

} // namespace taskforge
