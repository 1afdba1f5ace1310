#include "taskforge/rewrite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "taskforge/canonical.hpp"
#include "taskforge/errors.hpp"
#include "taskforge/evaluate.hpp"
#include "taskforge/fixedfn.hpp"

namespace taskforge {

namespace {

const WireType kLossWire{"loss", 1, WireKind::Nonneg};

std::string fresh_id(const Diagram& nd, const Diagram& src, std::string base) {
  while (nd.has_node(base) || src.has_node(base)) base += "'";
  return base;
}

std::string fresh_id(const Diagram& nd, std::string base) {
  while (nd.has_node(base)) base += "'";
  return base;
}

bool attrs_equal(const Box& a, const Box& b) {
  return a.kind == b.kind && a.param == b.param && a.fn == b.fn &&
         a.args == b.args && a.dist == b.dist && a.value == b.value &&
         a.ins == b.ins && a.outs == b.outs;
}

void drop_edges(Diagram& d, const std::function<bool(const Edge&)>& pred) {
  d.edges.erase(std::remove_if(d.edges.begin(), d.edges.end(), pred),
                d.edges.end());
}

void drop_node(Diagram& d, const std::string& id) {
  for (auto it = d.nodes.begin(); it != d.nodes.end(); ++it)
    if (it->id == id) {
      d.nodes.erase(it);
      return;
    }
  fail("UnknownNode", "no node '" + id + "'");
}

bool touches(const Edge& e, const std::string& id) {
  return e.from == id || e.to == id;
}

} // namespace

bool diagram_deterministic(const Diagram& d) {
  for (const Box& b : d.nodes) {
    if (b.kind == BoxKind::State) return false;
    if (b.kind == BoxKind::Fixed && fixed_info(b.fn).stochastic) return false;
  }
  return true;
}

Diagram zero_diagram(const std::vector<WireType>& inputs) {
  Diagram d;
  d.inputs = inputs;
  d.outputs = {kLossWire};
  d.add_node(const_box("zero", kLossWire, {0.0f}));
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    std::string id = fresh_id(d, "zdel" + std::to_string(s));
    d.add_node(delete_box(id, inputs[s]));
    d.connect(kIn, static_cast<int>(s), id, 0);
  }
  d.connect("zero", 0, kOut, 0);
  return d;
}

bool is_zero_diagram(const Diagram& d) {
  if (d.outputs.size() != 1 || d.outputs[0].dim != 1 ||
      d.outputs[0].kind != WireKind::Nonneg)
    return false;
  Wiring w(d);
  PortRef p = w.producer({kOut, 0});
  if (p.node == kIn) return false;
  const Box& b = d.box(p.node);
  return b.kind == BoxKind::Const && b.param.empty() &&
         b.value == std::vector<float>{0.0f};
}

Diagram slice(const Diagram& d, const PortRef& at) {
  Wiring w(d);

  // Copy boxes are transparent: chase the value back to the box or input
  // slot that actually produces it.
  std::function<PortRef(PortRef)> resolve = [&](PortRef p) -> PortRef {
    while (p.node != kIn) {
      const Box& b = d.box(p.node);
      if (b.kind != BoxKind::Copy) break;
      p = w.producer({b.id, 0});
    }
    return p;
  };

  PortRef target = resolve(at);

  // Count how often each terminal value is demanded inside the cone; each
  // box is materialised once, so no duplication can occur.
  std::map<PortRef, int> demand;
  std::set<std::string> needed;
  std::function<void(const PortRef&)> visit = [&](const PortRef& t) {
    if (t.node == kIn) return;
    const Box& b = d.box(t.node);
    if (needed.count(b.id)) return;
    needed.insert(b.id);
    for (std::size_t j = 0; j < b.ins.size(); ++j) {
      PortRef pj = resolve(w.producer({b.id, static_cast<int>(j)}));
      demand[pj]++;
      visit(pj);
    }
  };
  demand[target]++;
  visit(target);

  Diagram nd;
  nd.inputs = d.inputs;
  nd.outputs = {producer_type(d, target)};

  std::map<PortRef, std::vector<PortRef>> avail;
  std::map<PortRef, int> taken;
  int chain = 0;
  auto spread = [&](const PortRef& term, const PortRef& base, const WireType& t) {
    int m = demand.count(term) ? demand[term] : 0;
    std::vector<PortRef> refs;
    PortRef cur = base;
    for (int k = 0; k + 1 < m; ++k) {
      std::string id = fresh_id(nd, d, "_cp" + std::to_string(chain++));
      nd.add_node(copy_box(id, t));
      nd.connect(cur.node, cur.port, id, 0);
      refs.push_back({id, 0});
      cur = {id, 1};
    }
    refs.push_back(cur);
    avail[term] = refs;
  };

  for (std::size_t s = 0; s < d.inputs.size(); ++s) {
    PortRef slot{kIn, static_cast<int>(s)};
    if (!demand.count(slot)) {
      std::string id = fresh_id(nd, d, "_sink" + std::to_string(s));
      nd.add_node(delete_box(id, d.inputs[s]));
      nd.connect(kIn, static_cast<int>(s), id, 0);
    } else {
      spread(slot, slot, d.inputs[s]);
    }
  }

  for (int idx : topo_order(d)) {
    const Box& b = d.nodes[static_cast<std::size_t>(idx)];
    if (!needed.count(b.id)) continue;
    nd.add_node(b);
    for (std::size_t j = 0; j < b.ins.size(); ++j) {
      PortRef t = resolve(w.producer({b.id, static_cast<int>(j)}));
      PortRef r = avail.at(t)[static_cast<std::size_t>(taken[t]++)];
      nd.connect(r.node, r.port, b.id, static_cast<int>(j));
    }
    for (std::size_t p = 0; p < b.outs.size(); ++p) {
      PortRef term{b.id, static_cast<int>(p)};
      if (!demand.count(term)) {
        std::string id =
            fresh_id(nd, d, "_void" + std::to_string(p) + "_" + b.id);
        nd.add_node(delete_box(id, b.outs[p]));
        nd.connect(b.id, static_cast<int>(p), id, 0);
      } else {
        spread(term, term, b.outs[p]);
      }
    }
  }

  PortRef r = avail.at(target)[static_cast<std::size_t>(taken[target]++)];
  nd.connect(r.node, r.port, kOut, 0);
  validate_or_throw(nd);
  return nd;
}

// --- copy_through -------------------------------------------------------------

namespace {

const Box& copy_through_site(const Diagram& d, const std::string& site) {
  if (!d.has_node(site)) fail("UnknownNode", "no node '" + site + "'");
  const Box& b = d.box(site);
  if (b.kind == BoxKind::State ||
      (b.kind == BoxKind::Fixed && fixed_info(b.fn).stochastic))
    fail("StochasticBox",
         "'" + site + "' is stochastic; duplicating it changes the distribution");
  if (b.kind != BoxKind::Learner && b.kind != BoxKind::Fixed)
    fail("NotApplicable", "site '" + site + "' must be a learner or fixed box");
  if (b.outs.size() != 1)
    fail("NotApplicable", "site '" + site + "' must have exactly one output");
  if (b.ins.empty())
    fail("NotApplicable", "site '" + site + "' must have at least one input");
  return b;
}

Diagram copy_through_forward(const Diagram& side, const std::string& site) {
  Diagram d = side;
  const Box b = copy_through_site(d, site);
  Wiring w(d);
  PortRef c = w.consumer({site, 0});
  if (c.node == kOut || d.box(c.node).kind != BoxKind::Copy)
    fail("NotApplicable", "'" + site + "' does not feed a copy box");
  std::string cid = c.node;
  PortRef x = w.consumer({cid, 0});
  PortRef y = w.consumer({cid, 1});
  std::vector<PortRef> prods;
  for (std::size_t j = 0; j < b.ins.size(); ++j)
    prods.push_back(w.producer({site, static_cast<int>(j)}));

  drop_edges(d, [&](const Edge& e) { return touches(e, site) || touches(e, cid); });
  drop_node(d, cid);

  Box twin = b;
  twin.id = fresh_id(d, site);
  d.add_node(twin);
  for (std::size_t j = 0; j < b.ins.size(); ++j) {
    std::string fid = fresh_id(d, "_t" + std::to_string(j) + "_" + site);
    d.add_node(copy_box(fid, b.ins[j]));
    d.connect(prods[j].node, prods[j].port, fid, 0);
    d.connect(fid, 0, site, static_cast<int>(j));
    d.connect(fid, 1, twin.id, static_cast<int>(j));
  }
  d.connect(site, 0, x.node, x.port);
  d.connect(twin.id, 0, y.node, y.port);
  validate_or_throw(d);
  return d;
}

Diagram copy_through_backward(const Diagram& side, const std::string& site) {
  Diagram d = side;
  const Box b = copy_through_site(d, site);
  Wiring w(d);

  std::string twin;
  std::vector<std::string> cps;
  for (std::size_t j = 0; j < b.ins.size(); ++j) {
    PortRef p = w.producer({site, static_cast<int>(j)});
    if (p.node == kIn || d.box(p.node).kind != BoxKind::Copy)
      fail("NotApplicable", "input " + std::to_string(j) + " of '" + site +
                                "' is not fed by a copy box");
    PortRef other = w.consumer({p.node, 1 - p.port});
    if (other.node == kOut || other.port != static_cast<int>(j))
      fail("NotApplicable", "copy branches of '" + site +
                                "' do not feed a twin at matching ports");
    if (twin.empty())
      twin = other.node;
    else if (twin != other.node)
      fail("NotApplicable", "copy branches of '" + site +
                                "' lead to different boxes");
    cps.push_back(p.node);
  }
  if (twin == site) fail("NotApplicable", "box feeds itself");
  const Box tb = d.box(twin);
  if (!attrs_equal(b, tb))
    fail("NotApplicable", "'" + site + "' and '" + twin + "' are not twins");

  PortRef x = w.consumer({site, 0});
  PortRef y = w.consumer({twin, 0});
  std::vector<PortRef> prods;
  for (std::size_t j = 0; j < cps.size(); ++j) {
    PortRef p = w.producer({cps[j], 0});
    if (std::find(cps.begin(), cps.end(), p.node) != cps.end())
      fail("NotApplicable", "copy boxes feeding '" + site + "' are chained");
    prods.push_back(p);
  }

  drop_edges(d, [&](const Edge& e) {
    if (touches(e, site) || touches(e, twin)) return true;
    for (auto& c : cps)
      if (touches(e, c)) return true;
    return false;
  });
  {
    std::set<std::string> dropped(cps.begin(), cps.end());
    for (auto& c : dropped) drop_node(d, c);
  }
  drop_node(d, twin);

  for (std::size_t j = 0; j < prods.size(); ++j)
    d.connect(prods[j].node, prods[j].port, site, static_cast<int>(j));
  std::string cid = fresh_id(d, "_m_" + site);
  d.add_node(copy_box(cid, b.outs[0]));
  d.connect(site, 0, cid, 0);
  d.connect(cid, 0, x.node, x.port);
  d.connect(cid, 1, y.node, y.port);
  validate_or_throw(d);
  return d;
}

} // namespace

TaskEquation rule_copy_through(const TaskEquation& eq, const std::string& site,
                               bool on_rhs, bool backward) {
  TaskEquation out = eq;
  const Diagram& side = on_rhs ? eq.rhs : eq.lhs;
  Diagram next =
      backward ? copy_through_backward(side, site) : copy_through_forward(side, site);
  (on_rhs ? out.rhs : out.lhs) = std::move(next);
  return out;
}

// --- lincomb ------------------------------------------------------------------

namespace {

struct LincombSite {
  const Diagram* work = nullptr;
  std::string box;
  float w1 = 1.0f, w2 = 1.0f;
};

const Diagram& nonzero_side(const TaskEquation& eq) {
  if (is_zero_diagram(eq.rhs)) return eq.lhs;
  if (is_zero_diagram(eq.lhs)) return eq.rhs;
  fail("NotApplicable", "'" + eq.name + "' is not an equation to zero");
}

LincombSite find_lincomb(const TaskEquation& eq) {
  const Diagram& work = nonzero_side(eq);
  Wiring w(work);
  PortRef p = w.producer({kOut, 0});
  if (p.node == kIn) fail("NotApplicable", "output is a bare input");
  const Box& b = work.box(p.node);
  if (b.kind != BoxKind::Fixed || (b.fn != "add" && b.fn != "wadd"))
    fail("NotApplicable", "output of '" + eq.name + "' is not a weighted sum");
  LincombSite s;
  s.work = &work;
  s.box = b.id;
  if (b.fn == "wadd") {
    s.w1 = b.args.at(0);
    s.w2 = b.args.at(1);
  }
  if (!(s.w1 > 0.0f) || !(s.w2 > 0.0f))
    fail("NonPositiveWeight", "weighted sum in '" + eq.name +
                                  "' has a non-positive weight");
  return s;
}

} // namespace

std::vector<TaskEquation> rule_lincomb_split(const TaskEquation& eq) {
  LincombSite s = find_lincomb(eq);
  Wiring w(*s.work);
  Diagram l1 = slice(*s.work, w.producer({s.box, 0}));
  Diagram l2 = slice(*s.work, w.producer({s.box, 1}));
  Diagram z = zero_diagram(s.work->inputs);
  TaskEquation e1{eq.name + ".l", std::move(l1), z, eq.dist, eq.trainable};
  TaskEquation e2{eq.name + ".r", std::move(l2), std::move(z), eq.dist,
                  eq.trainable};
  return {std::move(e1), std::move(e2)};
}

namespace {

// Splices `sub`'s boxes and box-to-box edges into `nd` (renaming on
// collision). Input-slot deletes are skipped; the caller decides how each
// slot is shared. Reports the consumers each slot wants and the producer of
// sub's single output (possibly an input slot itself).
struct Embedded {
  std::vector<std::vector<PortRef>> slot_uses;
  PortRef out;
};

Embedded embed_side(Diagram& nd, const Diagram& sub) {
  if (sub.outputs.size() != 1)
    fail("NotApplicable", "embedded side must have exactly one output");
  Wiring w(sub);

  std::set<std::string> skip;
  for (std::size_t s = 0; s < sub.inputs.size(); ++s) {
    PortRef c = w.consumer({kIn, static_cast<int>(s)});
    if (c.node != kOut && sub.box(c.node).kind == BoxKind::Delete)
      skip.insert(c.node);
  }

  std::map<std::string, std::string> ren;
  for (const Box& b : sub.nodes) {
    if (skip.count(b.id)) continue;
    Box nb = b;
    nb.id = fresh_id(nd, b.id);
    ren[b.id] = nb.id;
    nd.add_node(std::move(nb));
  }

  Embedded em;
  em.slot_uses.resize(sub.inputs.size());
  for (const Edge& e : sub.edges) {
    if (skip.count(e.to)) continue;
    if (e.from == kIn) {
      if (e.to == kOut)
        em.out = {kIn, e.from_port};
      else
        em.slot_uses[static_cast<std::size_t>(e.from_port)].push_back(
            {ren.at(e.to), e.to_port});
      continue;
    }
    if (e.to == kOut) {
      em.out = {ren.at(e.from), e.from_port};
      continue;
    }
    nd.connect(ren.at(e.from), e.from_port, ren.at(e.to), e.to_port);
  }
  return em;
}

// Routes every input slot to its collected consumers: none -> delete,
// one -> direct wire, several -> a copy chain.
void wire_slots(Diagram& nd, const std::vector<std::vector<PortRef>>& uses) {
  for (std::size_t s = 0; s < uses.size(); ++s) {
    const auto& u = uses[s];
    const WireType& t = nd.inputs[s];
    if (u.empty()) {
      std::string id = fresh_id(nd, "_sink" + std::to_string(s));
      nd.add_node(delete_box(id, t));
      nd.connect(kIn, static_cast<int>(s), id, 0);
      continue;
    }
    PortRef cur{kIn, static_cast<int>(s)};
    for (std::size_t k = 0; k + 1 < u.size(); ++k) {
      std::string id =
          fresh_id(nd, "_sh" + std::to_string(s) + "_" + std::to_string(k));
      nd.add_node(copy_box(id, t));
      nd.connect(cur.node, cur.port, id, 0);
      nd.connect(id, 0, u[k].node, u[k].port);
      cur = {id, 1};
    }
    nd.connect(cur.node, cur.port, u.back().node, u.back().port);
  }
}

// Combines two single-output sides with a two-input box (weighted sum or a
// divergence) over a shared input interface.
Diagram join_sides(const Diagram& a, const Diagram& b, const Box& joiner) {
  Diagram nd;
  nd.inputs = a.inputs;
  nd.outputs = {joiner.outs[0]};
  auto ea = embed_side(nd, a);
  auto eb = embed_side(nd, b);
  Box jb = joiner;
  jb.id = fresh_id(nd, joiner.id);
  nd.add_node(jb);

  auto uses = ea.slot_uses;
  for (std::size_t s = 0; s < uses.size(); ++s)
    for (auto& p : eb.slot_uses[s]) uses[s].push_back(p);
  if (ea.out.node == kIn)
    uses[static_cast<std::size_t>(ea.out.port)].push_back({jb.id, 0});
  else
    nd.connect(ea.out.node, ea.out.port, jb.id, 0);
  if (eb.out.node == kIn)
    uses[static_cast<std::size_t>(eb.out.port)].push_back({jb.id, 1});
  else
    nd.connect(eb.out.node, eb.out.port, jb.id, 1);

  wire_slots(nd, uses);
  nd.connect(jb.id, 0, kOut, 0);
  validate_or_throw(nd);
  return nd;
}

} // namespace

TaskEquation rule_lincomb_merge(const TaskEquation& a, const TaskEquation& b,
                                float w1, float w2) {
  if (!(w1 > 0.0f) || !(w2 > 0.0f))
    fail("NonPositiveWeight", "merge weights must be strictly positive");
  const Diagram& wa = nonzero_side(a);
  const Diagram& wb = nonzero_side(b);
  if (wa.inputs != wb.inputs)
    fail("NotApplicable", "'" + a.name + "' and '" + b.name +
                              "' have different input interfaces");
  if (a.dist != b.dist)
    fail("NotApplicable", "'" + a.name + "' and '" + b.name +
                              "' range over different distributions");
  WireType t = wa.outputs[0];
  Box sum = fixed_box("_sum", "wadd", {w1, w2}, {t, t}, {t});
  Diagram lhs = join_sides(wa, wb, sum);
  std::set<std::string> train = a.trainable;
  train.insert(b.trainable.begin(), b.trainable.end());
  return TaskEquation{a.name + "+" + b.name, std::move(lhs),
                      zero_diagram(wa.inputs), a.dist, std::move(train)};
}

// --- positivity ----------------------------------------------------------------

TaskEquation rule_positivity_collapse(const TaskEquation& eq) {
  const Diagram& work = nonzero_side(eq);
  Wiring w(work);
  PortRef p = w.producer({kOut, 0});
  if (p.node == kIn) fail("NotApplicable", "output is a bare input");
  const Box& b = work.box(p.node);
  if (b.kind != BoxKind::Fixed || !fixed_info(b.fn).positive_divergence)
    fail("NotApplicable", "output of '" + eq.name +
                              "' is not a positive divergence box");
  Diagram f = slice(work, w.producer({b.id, 0}));
  Diagram g = slice(work, w.producer({b.id, 1}));
  return TaskEquation{eq.name + ".c", std::move(f), std::move(g), eq.dist,
                      eq.trainable};
}

TaskEquation rule_positivity_introduce(const TaskEquation& eq,
                                       const std::string& fn) {
  if (!fixed_info(fn).positive_divergence)
    fail("NotApplicable", "'" + fn + "' is not a positive divergence");
  if (eq.lhs.outputs.size() != 1)
    fail("NotApplicable", "'" + eq.name + "' must have exactly one output");
  WireType t = eq.lhs.outputs[0];
  Box div = fixed_box("_div", fn, {}, {t, t}, {kLossWire});
  Diagram lhs = join_sides(eq.lhs, eq.rhs, div);
  return TaskEquation{eq.name + ".d", std::move(lhs),
                      zero_diagram(eq.lhs.inputs), eq.dist, eq.trainable};
}

// --- postcompose ----------------------------------------------------------------

TaskEquation rule_postcompose(const TaskEquation& eq, const Diagram& post) {
  validate_or_throw(post);
  if (!diagram_deterministic(post))
    fail("NotApplicable", "post-composed diagram must be deterministic");
  if (post.inputs != eq.lhs.outputs)
    fail("NotApplicable", "post-composed diagram does not match the equation's "
                          "output interface");
  TaskEquation out = eq;
  out.name = eq.name + ".p";
  out.lhs = compose_seq(eq.lhs, post);
  out.rhs = compose_seq(eq.rhs, post);
  return out;
}

// --- numeric oracle --------------------------------------------------------------

namespace {

struct OracleSetup {
  ParamStore params;
  std::vector<Tensor> inputs; // one [n, dim] tensor per slot
};

void collect_spaces(const Diagram& d,
                    std::map<std::string, std::pair<int, int>>& mlps,
                    std::map<std::string, int>& vecs) {
  for (const Box& b : d.nodes) {
    if (b.kind == BoxKind::Learner) {
      int in = 0, out = 0;
      for (auto& t : b.ins) in += t.dim;
      for (auto& t : b.outs) out += t.dim;
      auto it = mlps.find(b.param);
      if (it == mlps.end())
        mlps[b.param] = {in, out};
      else if (it->second != std::make_pair(in, out))
        fail("SpaceConflict", "parameter space '" + b.param +
                                  "' used with conflicting interfaces");
    } else if (b.kind == BoxKind::Const && !b.param.empty()) {
      int dim = b.outs[0].dim;
      auto it = vecs.find(b.param);
      if (it == vecs.end())
        vecs[b.param] = dim;
      else if (it->second != dim)
        fail("SpaceConflict", "vector space '" + b.param +
                                  "' used with conflicting sizes");
    }
  }
}

OracleSetup oracle_setup(const std::vector<const TaskEquation*>& eqs, int n,
                         std::uint64_t seed) {
  for (auto* e : eqs) {
    if (!diagram_deterministic(e->lhs) || !diagram_deterministic(e->rhs))
      fail("StochasticBox", "numeric oracle needs deterministic equations");
    if (e->lhs.inputs != eqs[0]->lhs.inputs)
      fail("NotApplicable", "oracle equations have different interfaces");
  }
  std::map<std::string, std::pair<int, int>> mlps;
  std::map<std::string, int> vecs;
  for (auto* e : eqs) {
    collect_spaces(e->lhs, mlps, vecs);
    collect_spaces(e->rhs, mlps, vecs);
  }

  OracleSetup s;
  for (auto& [space, io] : mlps)
    s.params.declare(space,
                     MlpLayout{{io.first, 8, io.second},
                               {Act::LeakyRelu, Act::Linear}});
  for (auto& [space, dim] : vecs) s.params.declare(space, VectorLayout{dim});
  s.params.init(seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  for (const std::string& space : s.params.spaces()) {
    Tensor& flat = s.params.flat(space);
    for (std::size_t i = 0; i < flat.size(); ++i)
      flat.data()[i] = static_cast<float>(0.5 * rng.gaussian());
  }

  const auto& types = eqs[0]->lhs.inputs;
  for (const WireType& t : types) {
    Tensor x = Tensor::zeros({n, t.dim});
    for (int b = 0; b < n; ++b) {
      switch (t.kind) {
        case WireKind::Real:
          for (int c = 0; c < t.dim; ++c)
            x.at(b, c) = static_cast<float>(rng.gaussian());
          break;
        case WireKind::Nonneg:
          for (int c = 0; c < t.dim; ++c)
            x.at(b, c) = static_cast<float>(std::fabs(rng.gaussian()));
          break;
        case WireKind::Unit:
          for (int c = 0; c < t.dim; ++c)
            x.at(b, c) = static_cast<float>(rng.uniform());
          break;
        case WireKind::OneHot:
          x.at(b, static_cast<int>(rng.below(
                      static_cast<std::uint64_t>(t.dim)))) = 1.0f;
          break;
      }
    }
    s.inputs.push_back(std::move(x));
  }
  return s;
}

// Per-sample residual: largest coordinate gap between the two sides.
std::vector<double> residuals(const TaskEquation& eq, const OracleSetup& s) {
  Rng rng(1);
  auto ls = evaluate(eq.lhs, s.inputs, s.params, rng);
  auto rs = evaluate(eq.rhs, s.inputs, s.params, rng);
  int n = s.inputs.empty() ? 1 : s.inputs[0].rows();
  if (!ls.empty()) n = ls[0].rows();
  std::vector<double> r(static_cast<std::size_t>(n), 0.0);
  for (std::size_t j = 0; j < ls.size(); ++j)
    for (int b = 0; b < ls[j].rows(); ++b)
      for (int c = 0; c < ls[j].cols(); ++c)
        r[static_cast<std::size_t>(b)] =
            std::max(r[static_cast<std::size_t>(b)],
                     std::fabs(double(ls[j].at(b, c)) - double(rs[j].at(b, c))));
  return r;
}

} // namespace

double numeric_oracle(const TaskEquation& before, const TaskEquation& after,
                      int n, std::uint64_t seed) {
  OracleSetup s = oracle_setup({&before, &after}, n, seed);
  auto rb = residuals(before, s);
  auto ra = residuals(after, s);
  double dev = 0.0;
  for (std::size_t i = 0; i < rb.size(); ++i)
    dev = std::max(dev, std::fabs(rb[i] - ra[i]) / (1.0 + std::fabs(rb[i])));
  return dev;
}

// --- proof checking ---------------------------------------------------------------

namespace {

bool eqs_deterministic(std::initializer_list<const TaskEquation*> eqs) {
  for (auto* e : eqs)
    if (!diagram_deterministic(e->lhs) || !diagram_deterministic(e->rhs))
      return false;
  return true;
}

double oracle_lincomb(const TaskEquation& parent, const TaskEquation& a,
                      const TaskEquation& b, float w1, float w2, int n,
                      std::uint64_t seed) {
  OracleSetup s = oracle_setup({&parent, &a, &b}, n, seed);
  auto rp = residuals(parent, s);
  auto ra = residuals(a, s);
  auto rb = residuals(b, s);
  double dev = 0.0;
  for (std::size_t i = 0; i < rp.size(); ++i) {
    double combined = double(w1) * ra[i] + double(w2) * rb[i];
    dev = std::max(dev, std::fabs(rp[i] - combined) / (1.0 + std::fabs(rp[i])));
  }
  return dev;
}

// The divergence form and the plain form must vanish together: compare the
// zero-set indicators sample by sample.
double oracle_positivity(const TaskEquation& div_form,
                         const TaskEquation& plain_form, int n,
                         std::uint64_t seed) {
  OracleSetup s = oracle_setup({&div_form, &plain_form}, n, seed);
  auto rd = residuals(div_form, s);
  auto rp = residuals(plain_form, s);
  double dev = 0.0;
  for (std::size_t i = 0; i < rd.size(); ++i) {
    bool zd = rd[i] <= 1e-9;
    bool zp = rp[i] <= 1e-5;
    if (zd != zp) dev = 1.0;
  }
  return dev;
}

// Post-composition only preserves equality one way: a vanishing residual
// before the step must still vanish after it.
double oracle_postcompose(const TaskEquation& before, const TaskEquation& after,
                          int n, std::uint64_t seed) {
  OracleSetup s = oracle_setup({&before, &after}, n, seed);
  auto rb = residuals(before, s);
  auto ra = residuals(after, s);
  double dev = 0.0;
  for (std::size_t i = 0; i < rb.size(); ++i)
    if (rb[i] <= 1e-9 && ra[i] > 1e-5) dev = std::max(dev, std::min(ra[i], 1.0));
  return dev;
}

} // namespace

ProofVerdict check_proof(const ProofScript& script, const CheckOptions& opts) {
  ProofVerdict verdict;
  EquationSet state = script.source;

  for (std::size_t si = 0; si < script.steps.size(); ++si) {
    const ProofStep& st = script.steps[si];
    StepRecord rec;
    rec.rule = st.rule;
    rec.backward = st.backward;
    rec.eq = st.eq;
    rec.before_hash = state.hash();
    try {
      if (st.rule == "copy_through") {
        TaskEquation before = state.at(st.eq);
        TaskEquation after =
            rule_copy_through(before, st.site, st.on_rhs, st.backward);
        if (opts.run_oracle && eqs_deterministic({&before, &after})) {
          rec.deviation =
              numeric_oracle(before, after, opts.oracle_samples, opts.oracle_seed);
          rec.oracle_ran = true;
        }
        state.replace(st.eq, {std::move(after)});
      } else if (st.rule == "lincomb_split") {
        if (!st.backward) {
          TaskEquation before = state.at(st.eq);
          LincombSite ws = find_lincomb(before);
          auto parts = rule_lincomb_split(before);
          if (opts.run_oracle &&
              eqs_deterministic({&before, &parts[0], &parts[1]})) {
            rec.deviation = oracle_lincomb(before, parts[0], parts[1], ws.w1,
                                           ws.w2, opts.oracle_samples,
                                           opts.oracle_seed);
            rec.oracle_ran = true;
          }
          state.replace(st.eq, {std::move(parts[0]), std::move(parts[1])});
        } else {
          if (st.eq2 < 0) fail("BadStep", "lincomb merge needs eq2");
          TaskEquation a = state.at(st.eq);
          TaskEquation b = state.at(st.eq2);
          TaskEquation merged = rule_lincomb_merge(a, b, st.w1, st.w2);
          if (opts.run_oracle && eqs_deterministic({&merged, &a, &b})) {
            rec.deviation = oracle_lincomb(merged, a, b, st.w1, st.w2,
                                           opts.oracle_samples, opts.oracle_seed);
            rec.oracle_ran = true;
          }
          int hi = std::max(st.eq, st.eq2), lo = std::min(st.eq, st.eq2);
          if (hi == lo) fail("BadStep", "lincomb merge needs two equations");
          state.replace(hi, {});
          state.replace(lo, {std::move(merged)});
        }
      } else if (st.rule == "positivity_collapse") {
        if (!st.backward) {
          TaskEquation before = state.at(st.eq);
          TaskEquation after = rule_positivity_collapse(before);
          if (opts.run_oracle && eqs_deterministic({&before, &after})) {
            rec.deviation = oracle_positivity(before, after, opts.oracle_samples,
                                              opts.oracle_seed);
            rec.oracle_ran = true;
          }
          if (equation_trivial(after)) {
            rec.discharged.push_back(equation_canonical(after));
            state.replace(st.eq, {});
          } else {
            state.replace(st.eq, {std::move(after)});
          }
        } else {
          TaskEquation before = state.at(st.eq);
          TaskEquation after = rule_positivity_introduce(before, st.fn);
          if (opts.run_oracle && eqs_deterministic({&before, &after})) {
            rec.deviation = oracle_positivity(after, before, opts.oracle_samples,
                                              opts.oracle_seed);
            rec.oracle_ran = true;
          }
          state.replace(st.eq, {std::move(after)});
        }
      } else if (st.rule == "postcompose") {
        if (st.backward) fail("BadStep", "postcompose has no inverse");
        TaskEquation before = state.at(st.eq);
        TaskEquation after = rule_postcompose(before, st.post);
        if (opts.run_oracle && eqs_deterministic({&before, &after})) {
          rec.deviation = oracle_postcompose(before, after, opts.oracle_samples,
                                             opts.oracle_seed);
          rec.oracle_ran = true;
        }
        state.replace(st.eq, {std::move(after)});
      } else {
        fail("BadStep", "unknown rule '" + st.rule + "'");
      }
    } catch (const Error& e) {
      rec.after_hash = state.hash();
      verdict.steps.push_back(std::move(rec));
      verdict.failure = "step " + std::to_string(si) + " (" + st.rule +
                        "): " + e.what();
      verdict.final_canonical = state.canonical();
      return verdict;
    }
    if (rec.oracle_ran && rec.deviation > opts.oracle_tol) {
      rec.after_hash = state.hash();
      verdict.steps.push_back(std::move(rec));
      verdict.failure = "step " + std::to_string(si) + " (" + st.rule +
                        "): oracle deviation " +
                        std::to_string(verdict.steps.back().deviation) +
                        " exceeds tolerance";
      verdict.final_canonical = state.canonical();
      return verdict;
    }
    rec.after_hash = state.hash();
    verdict.steps.push_back(std::move(rec));
  }

  verdict.final_canonical = state.canonical();
  if (state.canonical() == script.target.canonical()) {
    verdict.verified = true;
  } else {
    verdict.failure = "final equation set differs from the target";
  }
  return verdict;
}

} // namespace taskforge
