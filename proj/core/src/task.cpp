#include "taskforge/task.hpp"

#include <algorithm>

#include "taskforge/errors.hpp"
#include "taskforge/fixedfn.hpp"
#include "taskforge/rewrite.hpp"

namespace taskforge {

namespace {

std::string fresh_id(const Diagram& d, std::string base) {
  while (d.has_node(base)) base += "'";
  return base;
}

// Keeps slot `keep`, deletes the rest.
Diagram project_to(const std::vector<WireType>& ins, std::size_t keep) {
  Diagram d;
  d.inputs = ins;
  d.outputs = {ins[keep]};
  for (std::size_t s = 0; s < ins.size(); ++s) {
    if (s == keep) {
      d.connect(kIn, static_cast<int>(s), kOut, 0);
    } else {
      std::string id = "drop" + std::to_string(s);
      d.add_node(delete_box(id, ins[s]));
      d.connect(kIn, static_cast<int>(s), id, 0);
    }
  }
  return d;
}

// Deletes every input and emits one constant.
Diagram const_spec(const std::vector<WireType>& ins, const WireType& t,
                   std::vector<float> v) {
  Diagram d;
  d.inputs = ins;
  d.outputs = {t};
  d.add_node(const_box("tgt", t, std::move(v)));
  d.connect("tgt", 0, kOut, 0);
  for (std::size_t s = 0; s < ins.size(); ++s) {
    std::string id = "drop" + std::to_string(s);
    d.add_node(delete_box(id, ins[s]));
    d.connect(kIn, static_cast<int>(s), id, 0);
  }
  return d;
}

const WireType kScore{"real01", 1, WireKind::Unit};

// dsc(x) against a constant verdict, on samples of `dist`.
AtomicTask judge_atom(std::string name, const WireType& x,
                      const std::string& dsc, float target,
                      const std::string& dist, std::set<std::string> trainable,
                      const Divergence& div, double weight);

} // namespace

bool CompoundTask::has_atom(const std::string& n) const {
  for (auto& a : atoms)
    if (a.name == n) return true;
  return false;
}

const AtomicTask& CompoundTask::atom(const std::string& n) const {
  for (auto& a : atoms)
    if (a.name == n) return a;
  fail("UnknownAtom", "task '" + name + "' has no atom '" + n + "'");
}

AtomicTask make_atom(std::string name, Diagram sys, Diagram spec,
                     std::string dist, std::set<std::string> trainable,
                     Divergence div, double weight) {
  validate_or_throw(sys);
  validate_or_throw(spec);
  if (sys.inputs != spec.inputs || sys.outputs != spec.outputs)
    fail("InterfaceMismatch",
         "atom '" + name + "': the two sides have different interfaces");
  if (sys.inputs.empty() != dist.empty())
    fail("BadDist", "atom '" + name +
                        "': a distribution is needed exactly when the "
                        "interface has inputs");
  if (!div.valid())
    fail("BadDivergence", "atom '" + name + "': invalid divergence");
  if (!(weight > 0.0))
    fail("NonPositiveWeight", "atom '" + name + "': weight must be positive");
  AtomicTask a{std::move(name),      std::move(sys), std::move(spec),
               std::move(dist),      std::move(trainable),
               std::move(div),       weight};
  std::set<std::string> present = atom_spaces(a);
  for (auto& s : a.trainable)
    if (!present.count(s))
      fail("UnknownSpace", "atom '" + a.name + "': trainable space '" + s +
                               "' does not appear in either side");
  return a;
}

TaskEquation to_equation(const AtomicTask& a) {
  return TaskEquation{a.name, a.sys, a.spec, a.dist, a.trainable};
}

EquationSet equations_of(const CompoundTask& t) {
  std::vector<TaskEquation> eqs;
  for (auto& a : t.atoms) eqs.push_back(to_equation(a));
  return EquationSet(std::move(eqs));
}

std::set<std::string> atom_spaces(const AtomicTask& a) {
  std::set<std::string> out;
  for (const Diagram* d : {&a.sys, &a.spec})
    for (auto& b : d->nodes) {
      if (b.kind == BoxKind::Learner) out.insert(b.param);
      if (b.kind == BoxKind::Const && !b.param.empty()) out.insert(b.param);
    }
  return out;
}

std::set<std::string> task_spaces(const CompoundTask& t) {
  std::set<std::string> out;
  for (auto& a : t.atoms) {
    auto s = atom_spaces(a);
    out.insert(s.begin(), s.end());
  }
  return out;
}

void validate_task(const CompoundTask& t) {
  if (t.atoms.empty())
    fail("EmptyTask", "task '" + t.name + "' has no atoms");
  std::set<std::string> seen;
  for (auto& a : t.atoms)
    if (!seen.insert(a.name).second)
      fail("DuplicateAtom",
           "task '" + t.name + "' has two atoms named '" + a.name + "'");
  // Each adversary must own its own private game: if two excluded spaces met
  // in one atom, their simultaneous min/max objectives would interfere.
  for (auto& a : t.atoms) {
    auto present = atom_spaces(a);
    std::vector<std::string> here;
    for (auto& s : t.excluded)
      if (present.count(s)) here.push_back(s);
    if (here.size() > 1)
      fail("SharedAdversary", "atom '" + a.name + "' contains both '" +
                                  here[0] + "' and '" + here[1] + "'");
  }
}

CompoundTask combine(std::string name, const std::vector<CompoundTask>& parts) {
  CompoundTask t;
  t.name = std::move(name);
  for (auto& p : parts) {
    for (auto& a : p.atoms) {
      if (t.has_atom(a.name))
        fail("DuplicateAtom", "combined task already has an atom '" + a.name + "'");
      t.atoms.push_back(a);
    }
    t.excluded.insert(p.excluded.begin(), p.excluded.end());
  }
  validate_task(t);
  return t;
}

CompoundTask with_prefix(CompoundTask t, const std::string& prefix) {
  for (auto& a : t.atoms) a.name = prefix + a.name;
  return t;
}

// --- specialise ---------------------------------------------------------------

namespace {

Diagram single_splice(const Diagram& d, const std::string& bid,
                      const Diagram& impl) {
  const Box& b = d.box(bid);
  if (impl.inputs != b.ins || impl.outputs != b.outs)
    fail("InterfaceMismatch", "replacement for '" + bid +
                                  "' has a different interface");
  Diagram nd;
  nd.inputs = d.inputs;
  nd.outputs = d.outputs;
  for (auto& n : d.nodes)
    if (n.id != bid) nd.add_node(n);

  std::map<std::string, std::string> ren;
  for (auto& n : impl.nodes) {
    Box nb = n;
    nb.id = fresh_id(nd, bid + "." + n.id);
    ren[n.id] = nb.id;
    nd.add_node(std::move(nb));
  }

  Wiring w(d);
  std::vector<PortRef> feed, read;
  for (std::size_t j = 0; j < b.ins.size(); ++j)
    feed.push_back(w.producer({bid, static_cast<int>(j)}));
  for (std::size_t p = 0; p < b.outs.size(); ++p)
    read.push_back(w.consumer({bid, static_cast<int>(p)}));

  for (auto& e : d.edges)
    if (e.from != bid && e.to != bid) nd.connect(e.from, e.from_port, e.to, e.to_port);

  for (auto& e : impl.edges) {
    PortRef from = e.from == kIn ? feed[static_cast<std::size_t>(e.from_port)]
                                 : PortRef{ren.at(e.from), e.from_port};
    PortRef to = e.to == kOut ? read[static_cast<std::size_t>(e.to_port)]
                              : PortRef{ren.at(e.to), e.to_port};
    nd.connect(from.node, from.port, to.node, to.port);
  }
  validate_or_throw(nd);
  return nd;
}

Diagram splice_space(const Diagram& d, const std::string& space,
                     const Diagram& impl) {
  // Collect the sites up front: the replacement may itself mention `space`
  // (e.g. a head realised inside a shared latent space), and only the boxes
  // of the original diagram are substitution sites.
  std::vector<std::string> hits;
  for (auto& n : d.nodes)
    if (n.kind == BoxKind::Learner && n.param == space) hits.push_back(n.id);
  Diagram cur = d;
  for (auto& h : hits) cur = single_splice(cur, h, impl);
  return cur;
}

std::set<std::string> impl_spaces(const Diagram& impl) {
  std::set<std::string> out;
  for (auto& b : impl.nodes) {
    if (b.kind == BoxKind::Learner) out.insert(b.param);
    if (b.kind == BoxKind::Const && !b.param.empty()) out.insert(b.param);
  }
  return out;
}

} // namespace

CompoundTask specialise(const CompoundTask& task, const std::string& space,
                        const Diagram& impl) {
  validate_or_throw(impl);
  std::set<std::string> fresh = impl_spaces(impl);
  CompoundTask out;
  out.name = task.name + "/" + space;
  out.excluded = task.excluded;
  if (out.excluded.erase(space) > 0)
    out.excluded.insert(fresh.begin(), fresh.end());
  for (auto& a : task.atoms) {
    AtomicTask na = a;
    na.sys = splice_space(a.sys, space, impl);
    na.spec = splice_space(a.spec, space, impl);
    if (na.trainable.erase(space) > 0)
      na.trainable.insert(fresh.begin(), fresh.end());
    out.atoms.push_back(std::move(na));
  }
  validate_task(out);
  return out;
}

// --- constructors ---------------------------------------------------------------

CompoundTask make_classification(const WireType& x, const WireType& y,
                                    const std::string& cls,
                                    const std::string& dist, Divergence div,
                                    double weight) {
  Diagram sys;
  sys.inputs = {x, y};
  sys.outputs = {y};
  sys.add_node(learner_box("cls", cls, {x}, {y}));
  sys.add_node(delete_box("dy", y));
  sys.connect(kIn, 0, "cls", 0);
  sys.connect("cls", 0, kOut, 0);
  sys.connect(kIn, 1, "dy", 0);
  CompoundTask t;
  t.name = "classification";
  t.atoms.push_back(make_atom("Classify", std::move(sys), project_to({x, y}, 1),
                              dist, {cls}, std::move(div), weight));
  validate_task(t);
  return t;
}

CompoundTask make_autoencoding(const WireType& x, const WireType& lat,
                                  const std::string& enc, const std::string& dec,
                                  const std::string& dist, Divergence div,
                                  double weight) {
  Diagram sys;
  sys.inputs = {x};
  sys.outputs = {x};
  sys.add_node(learner_box("enc", enc, {x}, {lat}));
  sys.add_node(learner_box("dec", dec, {lat}, {x}));
  sys.connect(kIn, 0, "enc", 0);
  sys.connect("enc", 0, "dec", 0);
  sys.connect("dec", 0, kOut, 0);
  CompoundTask t;
  t.name = "autoencoding";
  t.atoms.push_back(make_atom("Reconstruct", std::move(sys), identity({x}), dist,
                              {enc, dec}, std::move(div), weight));
  validate_task(t);
  return t;
}

namespace {

AtomicTask judge_atom(std::string name, const WireType& x,
                      const std::string& dsc, float target,
                      const std::string& dist, std::set<std::string> trainable,
                      const Divergence& div, double weight) {
  Diagram sys;
  sys.inputs = {x};
  sys.outputs = {kScore};
  sys.add_node(learner_box("dsc", dsc, {x}, {kScore}));
  sys.connect(kIn, 0, "dsc", 0);
  sys.connect("dsc", 0, kOut, 0);
  return make_atom(std::move(name), std::move(sys),
                   const_spec({x}, kScore, {target}), dist, std::move(trainable),
                   div, weight);
}

// dsc(head(z)) against a constant verdict, codes drawn inside the diagram.
AtomicTask judged_generation_atom(std::string name, const WireType& x,
                                  const WireType& code, const std::string& gen,
                                  const std::string& dsc,
                                  const std::string& code_dist, float target,
                                  std::set<std::string> trainable,
                                  const Divergence& div, double weight) {
  Diagram sys;
  sys.inputs = {};
  sys.outputs = {kScore};
  sys.add_node(state_box("z", code_dist, {code}));
  sys.add_node(learner_box("gen", gen, {code}, {x}));
  sys.add_node(learner_box("dsc", dsc, {x}, {kScore}));
  sys.connect("z", 0, "gen", 0);
  sys.connect("gen", 0, "dsc", 0);
  sys.connect("dsc", 0, kOut, 0);
  return make_atom(std::move(name), std::move(sys), const_spec({}, kScore, {target}),
                   "", std::move(trainable), div, weight);
}

} // namespace

CompoundTask make_gan(const WireType& x, const WireType& code,
                         const std::string& gen, const std::string& dsc,
                         const std::string& data_dist,
                         const std::string& code_dist, Divergence div,
                         double weight) {
  CompoundTask t;
  t.name = "gan";
  t.atoms.push_back(
      judge_atom("True", x, dsc, 1.0f, data_dist, {dsc}, div, weight));
  t.atoms.push_back(judged_generation_atom("Fake", x, code, gen, dsc, code_dist,
                                           0.0f, {dsc}, div, weight));
  t.atoms.push_back(judged_generation_atom("Fool", x, code, gen, dsc, code_dist,
                                           1.0f, {gen}, div, weight));
  t.excluded = {dsc};
  validate_task(t);
  return t;
}

CompoundTask make_vae(const WireType& x, const WireType& lat,
                         const std::string& enc, const std::string& dec,
                         const std::string& dist, Divergence recon_div,
                         double recon_weight, double norm_weight) {
  WireType stats{lat.name + "2", lat.dim * 2, WireKind::Real};

  Diagram rec;
  rec.inputs = {x};
  rec.outputs = {x};
  rec.add_node(learner_box("enc", enc, {x}, {stats}));
  rec.add_node(fixed_box("draw", "gaussian_sampler", {}, {stats}, {lat}));
  rec.add_node(learner_box("dec", dec, {lat}, {x}));
  rec.connect(kIn, 0, "enc", 0);
  rec.connect("enc", 0, "draw", 0);
  rec.connect("draw", 0, "dec", 0);
  rec.connect("dec", 0, kOut, 0);

  Diagram nrm;
  nrm.inputs = {x};
  nrm.outputs = {stats};
  nrm.add_node(learner_box("enc", enc, {x}, {stats}));
  nrm.connect(kIn, 0, "enc", 0);
  nrm.connect("enc", 0, kOut, 0);
  std::vector<float> standard(static_cast<std::size_t>(stats.dim), 0.0f);
  for (int i = lat.dim; i < stats.dim; ++i) standard[static_cast<std::size_t>(i)] = 1.0f;

  CompoundTask t;
  t.name = "vae";
  t.atoms.push_back(make_atom("Reconstruct", std::move(rec), identity({x}), dist,
                              {enc, dec}, std::move(recon_div), recon_weight));
  t.atoms.push_back(make_atom("Normalise", std::move(nrm),
                              const_spec({x}, stats, std::move(standard)), dist,
                              {enc}, Divergence::primitive(DivKind::KLGauss),
                              norm_weight));
  validate_task(t);
  return t;
}

CompoundTask make_cyclegan(const WireType& x, const WireType& y,
                              const std::string& f, const std::string& g,
                              const std::string& dx, const std::string& dy,
                              const std::string& x_dist, const std::string& y_dist,
                              Divergence gan_div, Divergence cycle_div,
                              double gan_weight, double cycle_weight) {
  auto translated_judge = [&](std::string name, const WireType& src,
                              const WireType& dst, const std::string& tr,
                              const std::string& judge, float target,
                              const std::string& dist,
                              std::set<std::string> trainable) {
    Diagram sys;
    sys.inputs = {src};
    sys.outputs = {kScore};
    sys.add_node(learner_box("tr", tr, {src}, {dst}));
    sys.add_node(learner_box("dsc", judge, {dst}, {kScore}));
    sys.connect(kIn, 0, "tr", 0);
    sys.connect("tr", 0, "dsc", 0);
    sys.connect("dsc", 0, kOut, 0);
    return make_atom(std::move(name), std::move(sys),
                     const_spec({src}, kScore, {target}), dist,
                     std::move(trainable), gan_div, gan_weight);
  };
  auto cycle = [&](std::string name, const WireType& src, const WireType& mid,
                   const std::string& there, const std::string& back,
                   const std::string& dist) {
    Diagram sys;
    sys.inputs = {src};
    sys.outputs = {src};
    sys.add_node(learner_box("there", there, {src}, {mid}));
    sys.add_node(learner_box("back", back, {mid}, {src}));
    sys.connect(kIn, 0, "there", 0);
    sys.connect("there", 0, "back", 0);
    sys.connect("back", 0, kOut, 0);
    return make_atom(std::move(name), std::move(sys), identity({src}), dist,
                     {f, g}, cycle_div, cycle_weight);
  };

  CompoundTask t;
  t.name = "cyclegan";
  t.atoms.push_back(judge_atom("TrueX", x, dx, 1.0f, x_dist, {dx}, gan_div, gan_weight));
  t.atoms.push_back(translated_judge("FakeX", y, x, g, dx, 0.0f, y_dist, {dx}));
  t.atoms.push_back(translated_judge("FoolX", y, x, g, dx, 1.0f, y_dist, {g}));
  t.atoms.push_back(judge_atom("TrueY", y, dy, 1.0f, y_dist, {dy}, gan_div, gan_weight));
  t.atoms.push_back(translated_judge("FakeY", x, y, f, dy, 0.0f, x_dist, {dy}));
  t.atoms.push_back(translated_judge("FoolY", x, y, f, dy, 1.0f, x_dist, {f}));
  t.atoms.push_back(cycle("CycleX", x, y, f, g, x_dist));
  t.atoms.push_back(cycle("CycleY", y, x, g, f, y_dist));
  t.excluded = {dx, dy};
  validate_task(t);
  return t;
}

CompoundTask make_energy_min(const WireType& x, const WireType& lat,
                             const std::string& enc, const std::string& dec,
                             float gamma, const std::string& dist,
                             bool code_extracting, const std::string& e_enc,
                             const std::string& e_dec) {
  if (!(gamma >= 0.0f))
    fail("NegativeWeight", "energy weight must be nonnegative");
  for (auto& fn : {e_enc, e_dec}) {
    auto info = fixed_info(fn);
    if (!info.known || !info.positive_divergence)
      fail("MissingEnergy",
           "'" + fn + "' is not a registered nonnegative penalty function");
  }
  const WireType loss{"loss", 1, WireKind::Nonneg};

  Diagram sys;
  if (code_extracting) {
    // The code wire is enc(x) itself, shared through explicit copies.
    sys.inputs = {x};
    sys.outputs = {loss};
    sys.add_node(copy_box("cx", x));
    sys.add_node(learner_box("enc", enc, {x}, {lat}));
    sys.add_node(copy_box("cz1", lat));
    sys.add_node(copy_box("cz2", lat));
    sys.add_node(fixed_box("dcode", e_enc, {}, {lat, lat}, {loss}));
    sys.add_node(learner_box("dec", dec, {lat}, {x}));
    sys.add_node(fixed_box("dimg", e_dec, {}, {x, x}, {loss}));
    sys.add_node(fixed_box("sum", "wadd", {gamma, 1.0f}, {loss, loss}, {loss}));
    sys.connect(kIn, 0, "cx", 0);
    sys.connect("cx", 0, "enc", 0);
    sys.connect("cx", 1, "dimg", 1);
    sys.connect("enc", 0, "cz1", 0);
    sys.connect("cz1", 0, "dcode", 0);
    sys.connect("cz1", 1, "cz2", 0);
    sys.connect("cz2", 0, "dcode", 1);
    sys.connect("cz2", 1, "dec", 0);
    sys.connect("dec", 0, "dimg", 0);
    sys.connect("dcode", 0, "sum", 0);
    sys.connect("dimg", 0, "sum", 1);
    sys.connect("sum", 0, kOut, 0);
  } else {
    // The code wire is drawn externally, alongside the data wire.
    sys.inputs = {x, lat};
    sys.outputs = {loss};
    sys.add_node(copy_box("cx", x));
    sys.add_node(copy_box("cz", lat));
    sys.add_node(learner_box("enc", enc, {x}, {lat}));
    sys.add_node(fixed_box("dcode", e_enc, {}, {lat, lat}, {loss}));
    sys.add_node(learner_box("dec", dec, {lat}, {x}));
    sys.add_node(fixed_box("dimg", e_dec, {}, {x, x}, {loss}));
    sys.add_node(fixed_box("sum", "wadd", {gamma, 1.0f}, {loss, loss}, {loss}));
    sys.connect(kIn, 0, "cx", 0);
    sys.connect(kIn, 1, "cz", 0);
    sys.connect("cx", 0, "enc", 0);
    sys.connect("cx", 1, "dimg", 1);
    sys.connect("enc", 0, "dcode", 0);
    sys.connect("cz", 0, "dcode", 1);
    sys.connect("cz", 1, "dec", 0);
    sys.connect("dec", 0, "dimg", 0);
    sys.connect("dcode", 0, "sum", 0);
    sys.connect("dimg", 0, "sum", 1);
    sys.connect("sum", 0, kOut, 0);
  }

  Diagram spec =
      code_extracting ? zero_diagram({x}) : zero_diagram({x, lat});
  CompoundTask t;
  t.name = "energy";
  t.atoms.push_back(make_atom("Energy", std::move(sys), std::move(spec), dist,
                              {enc, dec}, Divergence::primitive(DivKind::L1),
                              1.0));
  validate_task(t);
  return t;
}

CompoundTask make_manipulation(const WireType& x, const WireType& a,
                                  const std::string& put, const std::string& get,
                                  const ManipulationDists& dists,
                                  Divergence attr_div, Divergence image_div,
                                  const ManipulationOptions& opts) {
  CompoundTask t;
  t.name = "manipulation";

  { // Classify: get(x) = a on labelled pairs
    Diagram sys;
    sys.inputs = {x, a};
    sys.outputs = {a};
    sys.add_node(learner_box("get", get, {x}, {a}));
    sys.add_node(delete_box("da", a));
    sys.connect(kIn, 0, "get", 0);
    sys.connect("get", 0, kOut, 0);
    sys.connect(kIn, 1, "da", 0);
    t.atoms.push_back(make_atom("Classify", std::move(sys), project_to({x, a}, 1),
                                dists.labelled, {get}, attr_div, opts.w_classify));
  }
  { // PutGet: get(put(x, a')) = a'
    Diagram sys;
    sys.inputs = {x, a};
    sys.outputs = {a};
    sys.add_node(learner_box("put", put, {x, a}, {x}));
    sys.add_node(learner_box("get", get, {x}, {a}));
    sys.connect(kIn, 0, "put", 0);
    sys.connect(kIn, 1, "put", 1);
    sys.connect("put", 0, "get", 0);
    sys.connect("get", 0, kOut, 0);
    t.atoms.push_back(make_atom("PutGet", std::move(sys), project_to({x, a}, 1),
                                dists.image_attr, {put, get}, attr_div,
                                opts.w_putget));
  }
  { // GetPut: put(x, get(x)) = x
    Diagram sys;
    sys.inputs = {x};
    sys.outputs = {x};
    sys.add_node(copy_box("cx", x));
    sys.add_node(learner_box("get", get, {x}, {a}));
    sys.add_node(learner_box("put", put, {x, a}, {x}));
    sys.connect(kIn, 0, "cx", 0);
    sys.connect("cx", 0, "put", 0);
    sys.connect("cx", 1, "get", 0);
    sys.connect("get", 0, "put", 1);
    sys.connect("put", 0, kOut, 0);
    t.atoms.push_back(make_atom("GetPut", std::move(sys), identity({x}),
                                dists.image, {put, get}, image_div,
                                opts.w_getput));
  }
  if (opts.undo) { // Undo: put(put(x, a'), get(x)) = x
    Diagram sys;
    sys.inputs = {x, a};
    sys.outputs = {x};
    sys.add_node(copy_box("cx", x));
    sys.add_node(learner_box("get", get, {x}, {a}));
    sys.add_node(learner_box("put", put, {x, a}, {x}));
    sys.add_node(learner_box("put2", put, {x, a}, {x}));
    sys.connect(kIn, 0, "cx", 0);
    sys.connect("cx", 0, "put", 0);
    sys.connect("cx", 1, "get", 0);
    sys.connect(kIn, 1, "put", 1);
    sys.connect("put", 0, "put2", 0);
    sys.connect("get", 0, "put2", 1);
    sys.connect("put2", 0, kOut, 0);
    t.atoms.push_back(make_atom("Undo", std::move(sys), project_to({x, a}, 0),
                                dists.image_attr, {put, get}, image_div,
                                opts.w_undo));
  }
  if (opts.strong || opts.putput) { // PutPut: put(put(x, a1), a2) = put(x, a2)
    Diagram sys;
    sys.inputs = {x, a, a};
    sys.outputs = {x};
    sys.add_node(learner_box("put", put, {x, a}, {x}));
    sys.add_node(learner_box("put2", put, {x, a}, {x}));
    sys.connect(kIn, 0, "put", 0);
    sys.connect(kIn, 1, "put", 1);
    sys.connect("put", 0, "put2", 0);
    sys.connect(kIn, 2, "put2", 1);
    sys.connect("put2", 0, kOut, 0);

    Diagram spec;
    spec.inputs = {x, a, a};
    spec.outputs = {x};
    spec.add_node(learner_box("put", put, {x, a}, {x}));
    spec.add_node(delete_box("da", a));
    spec.connect(kIn, 0, "put", 0);
    spec.connect(kIn, 1, "da", 0);
    spec.connect(kIn, 2, "put", 1);
    spec.connect("put", 0, kOut, 0);
    t.atoms.push_back(make_atom("PutPut", std::move(sys), std::move(spec),
                                dists.image_attr2, {put}, image_div,
                                opts.w_putput));
  }
  if (opts.strong) {
    // Adversary on edited images keeps outputs on the data manifold.
    t.atoms.push_back(judge_atom("TruePut", x, opts.dsc, 1.0f, dists.image,
                                 {opts.dsc}, Divergence::primitive(DivKind::BCE),
                                 opts.w_gan));
    auto edited_judge = [&](std::string name, float target,
                            std::set<std::string> trainable) {
      Diagram sys;
      sys.inputs = {x, a};
      sys.outputs = {kScore};
      sys.add_node(learner_box("put", put, {x, a}, {x}));
      sys.add_node(learner_box("dsc", opts.dsc, {x}, {kScore}));
      sys.connect(kIn, 0, "put", 0);
      sys.connect(kIn, 1, "put", 1);
      sys.connect("put", 0, "dsc", 0);
      sys.connect("dsc", 0, kOut, 0);
      return make_atom(std::move(name), std::move(sys),
                       const_spec({x, a}, kScore, {target}), dists.image_attr,
                       std::move(trainable),
                       Divergence::primitive(DivKind::BCE), opts.w_gan);
    };
    t.atoms.push_back(edited_judge("FakePut", 0.0f, {opts.dsc}));
    t.atoms.push_back(edited_judge("FoolPut", 1.0f, {put}));
    t.excluded = {opts.dsc};
  }
  validate_task(t);
  return t;
}

CompoundTask make_strong_manipulation(const WireType& x, const WireType& a,
                                      const std::string& put,
                                      const std::string& get,
                                      const ManipulationDists& dists,
                                      Divergence attr_div, Divergence image_div,
                                      const ManipulationOptions& opts) {
  ManipulationOptions o = opts;
  o.strong = true;
  return make_manipulation(x, a, put, get, dists, std::move(attr_div),
                           std::move(image_div), o);
}

CompoundTask make_complement_manipulation(const WireType& x, const WireType& a,
                                const WireType& c, const std::string& putc,
                                const std::string& get, const std::string& seed,
                                const ManipulationDists& dists,
                                Divergence attr_div, Divergence image_div,
                                const ManipulationOptions& opts) {
  CompoundTask t;
  t.name = "complement";
  auto seed_box = [&]() {
    return const_box("c0", c, std::vector<float>(static_cast<std::size_t>(c.dim), 0.0f),
                     seed);
  };

  { // Classify
    Diagram sys;
    sys.inputs = {x, a};
    sys.outputs = {a};
    sys.add_node(learner_box("get", get, {x}, {a}));
    sys.add_node(delete_box("da", a));
    sys.connect(kIn, 0, "get", 0);
    sys.connect("get", 0, kOut, 0);
    sys.connect(kIn, 1, "da", 0);
    t.atoms.push_back(make_atom("Classify", std::move(sys), project_to({x, a}, 1),
                                dists.labelled, {get}, attr_div, opts.w_classify));
  }
  { // PutGet with a scratchpad that is thrown away
    Diagram sys;
    sys.inputs = {x, a};
    sys.outputs = {a};
    sys.add_node(seed_box());
    sys.add_node(learner_box("put", putc, {x, a, c}, {x, c}));
    sys.add_node(learner_box("get", get, {x}, {a}));
    sys.add_node(delete_box("dc", c));
    sys.connect(kIn, 0, "put", 0);
    sys.connect(kIn, 1, "put", 1);
    sys.connect("c0", 0, "put", 2);
    sys.connect("put", 0, "get", 0);
    sys.connect("put", 1, "dc", 0);
    sys.connect("get", 0, kOut, 0);
    t.atoms.push_back(make_atom("PutGet", std::move(sys), project_to({x, a}, 1),
                                dists.image_attr, {putc, get, seed}, attr_div,
                                opts.w_putget));
  }
  { // GetPut
    Diagram sys;
    sys.inputs = {x};
    sys.outputs = {x};
    sys.add_node(copy_box("cx", x));
    sys.add_node(seed_box());
    sys.add_node(learner_box("get", get, {x}, {a}));
    sys.add_node(learner_box("put", putc, {x, a, c}, {x, c}));
    sys.add_node(delete_box("dc", c));
    sys.connect(kIn, 0, "cx", 0);
    sys.connect("cx", 0, "put", 0);
    sys.connect("cx", 1, "get", 0);
    sys.connect("get", 0, "put", 1);
    sys.connect("c0", 0, "put", 2);
    sys.connect("put", 0, kOut, 0);
    sys.connect("put", 1, "dc", 0);
    t.atoms.push_back(make_atom("GetPut", std::move(sys), identity({x}),
                                dists.image, {putc, get, seed}, image_div,
                                opts.w_getput));
  }
  if (opts.undo) { // Undo threads the first edit's scratchpad into the second
    Diagram sys;
    sys.inputs = {x, a};
    sys.outputs = {x};
    sys.add_node(copy_box("cx", x));
    sys.add_node(seed_box());
    sys.add_node(learner_box("get", get, {x}, {a}));
    sys.add_node(learner_box("put", putc, {x, a, c}, {x, c}));
    sys.add_node(learner_box("put2", putc, {x, a, c}, {x, c}));
    sys.add_node(delete_box("dc", c));
    sys.connect(kIn, 0, "cx", 0);
    sys.connect("cx", 0, "put", 0);
    sys.connect("cx", 1, "get", 0);
    sys.connect(kIn, 1, "put", 1);
    sys.connect("c0", 0, "put", 2);
    sys.connect("put", 0, "put2", 0);
    sys.connect("get", 0, "put2", 1);
    sys.connect("put", 1, "put2", 2);
    sys.connect("put2", 0, kOut, 0);
    sys.connect("put2", 1, "dc", 0);
    t.atoms.push_back(make_atom("Undo", std::move(sys), project_to({x, a}, 0),
                                dists.image_attr, {putc, get, seed}, image_div,
                                opts.w_undo));
  }
  if (opts.strong || opts.putput) {
    // PutPut threads the scratchpad: the second edit receives the first
    // edit's scratchpad, the spec edits once from the seed.
    Diagram sys;
    sys.inputs = {x, a, a};
    sys.outputs = {x};
    sys.add_node(seed_box());
    sys.add_node(learner_box("put", putc, {x, a, c}, {x, c}));
    sys.add_node(learner_box("put2", putc, {x, a, c}, {x, c}));
    sys.add_node(delete_box("dc", c));
    sys.connect(kIn, 0, "put", 0);
    sys.connect(kIn, 1, "put", 1);
    sys.connect("c0", 0, "put", 2);
    sys.connect("put", 0, "put2", 0);
    sys.connect(kIn, 2, "put2", 1);
    sys.connect("put", 1, "put2", 2);
    sys.connect("put2", 0, kOut, 0);
    sys.connect("put2", 1, "dc", 0);

    Diagram spec;
    spec.inputs = {x, a, a};
    spec.outputs = {x};
    spec.add_node(seed_box());
    spec.add_node(learner_box("put", putc, {x, a, c}, {x, c}));
    spec.add_node(delete_box("da", a));
    spec.add_node(delete_box("dc", c));
    spec.connect(kIn, 0, "put", 0);
    spec.connect(kIn, 1, "da", 0);
    spec.connect(kIn, 2, "put", 1);
    spec.connect("c0", 0, "put", 2);
    spec.connect("put", 0, kOut, 0);
    spec.connect("put", 1, "dc", 0);
    t.atoms.push_back(make_atom("PutPut", std::move(sys), std::move(spec),
                                dists.image_attr2, {putc, seed}, image_div,
                                opts.w_putput));
  }
  validate_task(t);
  return t;
}

CompoundTask make_latent_manipulation(const WireType& x, const WireType& a,
                                      const WireType& lat, const WireType& c,
                                      const LatentSpaces& sp, PutStyle style,
                                      const ManipulationDists& dists,
                                      Divergence attr_div, Divergence image_div,
                                      const ManipulationOptions& opts) {
  bool complemented = c.dim > 0;
  if (complemented) style = PutStyle::LatentNet;
  // Abstract editor/reader names that cannot collide with real spaces.
  const std::string abs_put = sp.put + "@abstract";
  const std::string abs_get = sp.get + "@abstract";

  CompoundTask base =
      complemented
          ? make_complement_manipulation(x, a, c, abs_put, abs_get, sp.seed,
                                         dists, attr_div, image_div, opts)
          : make_manipulation(x, a, abs_put, abs_get, dists, attr_div,
                              image_div, opts);

  Diagram get_impl;
  get_impl.inputs = {x};
  get_impl.outputs = {a};
  get_impl.add_node(learner_box("enc", sp.enc, {x}, {lat}));
  get_impl.add_node(learner_box("head", sp.get, {lat}, {a}));
  get_impl.connect(kIn, 0, "enc", 0);
  get_impl.connect("enc", 0, "head", 0);
  get_impl.connect("head", 0, kOut, 0);

  Diagram put_impl;
  if (style == PutStyle::LinearOffset) {
    put_impl.inputs = {x, a};
    put_impl.outputs = {x};
    put_impl.add_node(learner_box("enc", sp.enc, {x}, {lat}));
    put_impl.add_node(learner_box("vec", sp.put, {a}, {lat}));
    put_impl.add_node(fixed_box("mix", "add", {}, {lat, lat}, {lat}));
    put_impl.add_node(learner_box("dec", sp.dec, {lat}, {x}));
    put_impl.connect(kIn, 0, "enc", 0);
    put_impl.connect(kIn, 1, "vec", 0);
    put_impl.connect("enc", 0, "mix", 0);
    put_impl.connect("vec", 0, "mix", 1);
    put_impl.connect("mix", 0, "dec", 0);
    put_impl.connect("dec", 0, kOut, 0);
  } else if (!complemented) {
    WireType mix{lat.name + "+" + a.name, lat.dim + a.dim, WireKind::Real};
    put_impl.inputs = {x, a};
    put_impl.outputs = {x};
    put_impl.add_node(learner_box("enc", sp.enc, {x}, {lat}));
    put_impl.add_node(fixed_box("cat", "concat", {}, {lat, a}, {mix}));
    put_impl.add_node(learner_box("net", sp.put, {mix}, {lat}));
    put_impl.add_node(learner_box("dec", sp.dec, {lat}, {x}));
    put_impl.connect(kIn, 0, "enc", 0);
    put_impl.connect("enc", 0, "cat", 0);
    put_impl.connect(kIn, 1, "cat", 1);
    put_impl.connect("cat", 0, "net", 0);
    put_impl.connect("net", 0, "dec", 0);
    put_impl.connect("dec", 0, kOut, 0);
  } else {
    WireType mix1{lat.name + "+" + a.name, lat.dim + a.dim, WireKind::Real};
    WireType mix2{mix1.name + "+" + c.name, mix1.dim + c.dim, WireKind::Real};
    WireType out2{lat.name + "+" + c.name, lat.dim + c.dim, WireKind::Real};
    put_impl.inputs = {x, a, c};
    put_impl.outputs = {x, c};
    put_impl.add_node(learner_box("enc", sp.enc, {x}, {lat}));
    put_impl.add_node(fixed_box("cat1", "concat", {}, {lat, a}, {mix1}));
    put_impl.add_node(fixed_box("cat2", "concat", {}, {mix1, c}, {mix2}));
    put_impl.add_node(learner_box("net", sp.put, {mix2}, {out2}));
    put_impl.add_node(fixed_box("uncat", "split", {}, {out2}, {lat, c}));
    put_impl.add_node(learner_box("dec", sp.dec, {lat}, {x}));
    put_impl.connect(kIn, 0, "enc", 0);
    put_impl.connect("enc", 0, "cat1", 0);
    put_impl.connect(kIn, 1, "cat1", 1);
    put_impl.connect("cat1", 0, "cat2", 0);
    put_impl.connect(kIn, 2, "cat2", 1);
    put_impl.connect("cat2", 0, "net", 0);
    put_impl.connect("net", 0, "uncat", 0);
    put_impl.connect("uncat", 0, "dec", 0);
    put_impl.connect("uncat", 1, kOut, 1);
    put_impl.connect("dec", 0, kOut, 0);
  }

  CompoundTask t = specialise(specialise(base, abs_get, get_impl), abs_put,
                              put_impl);
  t.name = "latent-manipulation";
  return t;
}

CompoundTask make_stack(const WireType& s, const WireType& x,
                           const std::string& psh, const std::string& pop,
                           const std::string& bot, const std::string& dist,
                           Divergence div, double w_pshpop, double w_empty) {
  CompoundTask t;
  t.name = "stack";

  { // PshPop: pop(psh(s, x)) = (s, x)
    Diagram sys;
    sys.inputs = {s, x};
    sys.outputs = {s, x};
    sys.add_node(learner_box("psh", psh, {s, x}, {s}));
    sys.add_node(learner_box("pop", pop, {s}, {s, x}));
    sys.connect(kIn, 0, "psh", 0);
    sys.connect(kIn, 1, "psh", 1);
    sys.connect("psh", 0, "pop", 0);
    sys.connect("pop", 0, kOut, 0);
    sys.connect("pop", 1, kOut, 1);
    t.atoms.push_back(make_atom("PshPop", std::move(sys), identity({s, x}), dist,
                                {psh, pop}, div, w_pshpop));
  }
  { // Empty: pop(bot) = (bot, 0)
    Diagram sys;
    sys.inputs = {};
    sys.outputs = {s, x};
    sys.add_node(const_box("bot", s,
                           std::vector<float>(static_cast<std::size_t>(s.dim), 0.0f),
                           bot));
    sys.add_node(learner_box("pop", pop, {s}, {s, x}));
    sys.connect("bot", 0, "pop", 0);
    sys.connect("pop", 0, kOut, 0);
    sys.connect("pop", 1, kOut, 1);

    Diagram spec;
    spec.inputs = {};
    spec.outputs = {s, x};
    spec.add_node(const_box("bot", s,
                            std::vector<float>(static_cast<std::size_t>(s.dim), 0.0f),
                            bot));
    spec.add_node(const_box("zx", x,
                            std::vector<float>(static_cast<std::size_t>(x.dim), 0.0f)));
    spec.connect("bot", 0, kOut, 0);
    spec.connect("zx", 0, kOut, 1);
    t.atoms.push_back(make_atom("Empty", std::move(sys), std::move(spec), "",
                                {pop, bot}, div, w_empty));
  }
  validate_task(t);
  return t;
}

} // namespace taskforge
