#include "taskforge/diagram.hpp"

#include <algorithm>
#include <set>

#include "taskforge/fixedfn.hpp"

namespace taskforge {

std::string wirekind_to_string(WireKind k) {
  switch (k) {
    case WireKind::Real: return "real";
    case WireKind::Nonneg: return "nonneg";
    case WireKind::OneHot: return "onehot";
    case WireKind::Unit: return "unit";
  }
  return "?";
}

WireKind wirekind_from_string(const std::string& s) {
  if (s == "real") return WireKind::Real;
  if (s == "nonneg") return WireKind::Nonneg;
  if (s == "onehot") return WireKind::OneHot;
  if (s == "unit") return WireKind::Unit;
  fail("BadConfig", "unknown wire kind '" + s + "'");
}

std::string WireType::to_string() const {
  return name + ":" + std::to_string(dim) + ":" + wirekind_to_string(kind);
}

std::string boxkind_to_string(BoxKind k) {
  switch (k) {
    case BoxKind::Learner: return "learner";
    case BoxKind::Fixed: return "fixed";
    case BoxKind::Copy: return "copy";
    case BoxKind::Delete: return "delete";
    case BoxKind::Swap: return "swap";
    case BoxKind::State: return "state";
    case BoxKind::Const: return "const";
  }
  return "?";
}

Box learner_box(std::string id, std::string param, std::vector<WireType> ins,
                std::vector<WireType> outs) {
  if (outs.empty()) fail("BadConfig", "learner box needs at least one output");
  Box b;
  b.id = std::move(id);
  b.kind = BoxKind::Learner;
  b.param = std::move(param);
  b.ins = std::move(ins);
  b.outs = std::move(outs);
  return b;
}

Box fixed_box(std::string id, std::string fn, std::vector<float> args,
              std::vector<WireType> ins, std::vector<WireType> outs) {
  Box b;
  b.id = std::move(id);
  b.kind = BoxKind::Fixed;
  b.fn = std::move(fn);
  b.args = std::move(args);
  b.ins = std::move(ins);
  b.outs = std::move(outs);
  return b;
}

Box copy_box(std::string id, WireType t) {
  Box b;
  b.id = std::move(id);
  b.kind = BoxKind::Copy;
  b.ins = {t};
  b.outs = {t, t};
  return b;
}

Box delete_box(std::string id, WireType t) {
  Box b;
  b.id = std::move(id);
  b.kind = BoxKind::Delete;
  b.ins = {std::move(t)};
  return b;
}

Box swap_box(std::string id, WireType a, WireType b_) {
  Box b;
  b.id = std::move(id);
  b.kind = BoxKind::Swap;
  b.ins = {a, b_};
  b.outs = {b_, a};
  return b;
}

Box state_box(std::string id, std::string dist, std::vector<WireType> outs) {
  if (outs.empty()) fail("BadConfig", "state box needs at least one output");
  Box b;
  b.id = std::move(id);
  b.kind = BoxKind::State;
  b.dist = std::move(dist);
  b.outs = std::move(outs);
  return b;
}

Box const_box(std::string id, WireType t, std::vector<float> value,
              std::string trainable_param) {
  if (trainable_param.empty() && int(value.size()) != t.dim)
    fail("ShapeMismatch", "const box value length must equal its type dim");
  Box b;
  b.id = std::move(id);
  b.kind = BoxKind::Const;
  b.value = std::move(value);
  b.param = std::move(trainable_param);
  b.outs = {std::move(t)};
  return b;
}

const Box& Diagram::box(const std::string& id) const {
  for (const Box& b : nodes)
    if (b.id == id) return b;
  fail("BadConfig", "no node '" + id + "'");
}

Box& Diagram::box(const std::string& id) {
  for (Box& b : nodes)
    if (b.id == id) return b;
  fail("BadConfig", "no node '" + id + "'");
}

bool Diagram::has_node(const std::string& id) const {
  for (const Box& b : nodes)
    if (b.id == id) return true;
  return false;
}

void Diagram::add_node(Box b) {
  if (b.id.empty() || b.id == kIn || b.id == kOut)
    fail("BadConfig", "bad node id '" + b.id + "'");
  if (has_node(b.id)) fail("BadConfig", "duplicate node id '" + b.id + "'");
  nodes.push_back(std::move(b));
}

void Diagram::connect(const std::string& from, int from_port,
                      const std::string& to, int to_port) {
  edges.push_back(Edge{from, from_port, to, to_port});
}

WireType producer_type(const Diagram& d, const PortRef& p) {
  if (p.node == kIn) {
    if (p.port < 0 || p.port >= int(d.inputs.size()))
      fail("BadConfig", "input slot out of range");
    return d.inputs[p.port];
  }
  const Box& b = d.box(p.node);
  if (p.port < 0 || p.port >= int(b.outs.size()))
    fail("BadConfig", "output port out of range on '" + p.node + "'");
  return b.outs[p.port];
}

WireType consumer_type(const Diagram& d, const PortRef& p) {
  if (p.node == kOut) {
    if (p.port < 0 || p.port >= int(d.outputs.size()))
      fail("BadConfig", "output slot out of range");
    return d.outputs[p.port];
  }
  const Box& b = d.box(p.node);
  if (p.port < 0 || p.port >= int(b.ins.size()))
    fail("BadConfig", "input port out of range on '" + p.node + "'");
  return b.ins[p.port];
}

ValidationReport validate(const Diagram& d) {
  ValidationReport rep;
  auto issue = [&rep](const char* code, std::string detail) {
    rep.issues.push_back(ValidationIssue{code, std::move(detail)});
  };

  std::set<std::string> ids;
  for (const Box& b : d.nodes) {
    if (b.id.empty() || b.id == kIn || b.id == kOut)
      issue("BadConfig", "bad node id '" + b.id + "'");
    if (!ids.insert(b.id).second)
      issue("BadConfig", "duplicate node id '" + b.id + "'");
    switch (b.kind) {
      case BoxKind::Copy:
        if (b.ins.size() != 1 || b.outs.size() != 2 || b.ins[0] != b.outs[0] ||
            b.ins[0] != b.outs[1])
          issue("TypeMismatch", "copy box '" + b.id + "' must be T -> T,T");
        break;
      case BoxKind::Delete:
        if (b.ins.size() != 1 || !b.outs.empty())
          issue("TypeMismatch", "delete box '" + b.id + "' must be T -> ()");
        break;
      case BoxKind::Swap:
        if (b.ins.size() != 2 || b.outs.size() != 2 || b.ins[0] != b.outs[1] ||
            b.ins[1] != b.outs[0])
          issue("TypeMismatch", "swap box '" + b.id + "' must be A,B -> B,A");
        break;
      case BoxKind::State:
        if (!b.ins.empty() || b.outs.empty())
          issue("TypeMismatch", "state box '" + b.id + "' must have outputs only");
        break;
      case BoxKind::Const:
        if (!b.ins.empty() || b.outs.size() != 1)
          issue("TypeMismatch", "const box '" + b.id + "' must be () -> T");
        else if (b.param.empty() && int(b.value.size()) != b.outs[0].dim)
          issue("ShapeMismatch", "const box '" + b.id + "' value/dim mismatch");
        break;
      case BoxKind::Learner:
        if (b.outs.empty())
          issue("TypeMismatch", "learner box '" + b.id + "' needs outputs");
        if (b.param.empty())
          issue("BadConfig", "learner box '" + b.id + "' needs a param space");
        break;
      case BoxKind::Fixed: {
        std::string err = fixed_typecheck(b);
        if (!err.empty()) issue("TypeMismatch", err);
        break;
      }
    }
  }

  // Edge sanity + type agreement.
  for (const Edge& e : d.edges) {
    bool from_ok = e.from == kIn ? (e.from_port >= 0 &&
                                    e.from_port < int(d.inputs.size()))
                                 : (ids.count(e.from) &&
                                    e.from_port >= 0 &&
                                    e.from_port <
                                        int(d.box(e.from).outs.size()));
    bool to_ok = e.to == kOut ? (e.to_port >= 0 &&
                                 e.to_port < int(d.outputs.size()))
                              : (ids.count(e.to) && e.to_port >= 0 &&
                                 e.to_port < int(d.box(e.to).ins.size()));
    if (!from_ok || !to_ok) {
      issue("BadConfig", "edge references unknown endpoint " + e.from + ":" +
                             std::to_string(e.from_port) + " -> " + e.to +
                             ":" + std::to_string(e.to_port));
      continue;
    }
    WireType pt = producer_type(d, PortRef{e.from, e.from_port});
    WireType ct = consumer_type(d, PortRef{e.to, e.to_port});
    if (pt != ct)
      issue("TypeMismatch", "edge " + e.from + ":" +
                                std::to_string(e.from_port) + " (" +
                                pt.to_string() + ") -> " + e.to + ":" +
                                std::to_string(e.to_port) + " (" +
                                ct.to_string() + ")");
  }

  // Linearity: each producer/consumer port used exactly once.
  std::map<std::pair<std::string, int>, int> prod_use, cons_use;
  for (const Edge& e : d.edges) {
    prod_use[{e.from, e.from_port}]++;
    cons_use[{e.to, e.to_port}]++;
  }
  auto check_port = [&issue](const std::map<std::pair<std::string, int>, int>& m,
                             const std::string& node, int port,
                             const char* what) {
    auto it = m.find({node, port});
    int n = it == m.end() ? 0 : it->second;
    if (n != 1)
      issue("LinearityError", std::string(what) + " " + node + ":" +
                                  std::to_string(port) + " used " +
                                  std::to_string(n) + " times");
  };
  for (std::size_t i = 0; i < d.inputs.size(); ++i)
    check_port(prod_use, kIn, int(i), "input slot");
  for (std::size_t i = 0; i < d.outputs.size(); ++i)
    check_port(cons_use, kOut, int(i), "output slot");
  for (const Box& b : d.nodes) {
    for (std::size_t p = 0; p < b.outs.size(); ++p)
      check_port(prod_use, b.id, int(p), "output port");
    for (std::size_t p = 0; p < b.ins.size(); ++p)
      check_port(cons_use, b.id, int(p), "input port");
  }

  // Acyclicity (only meaningful when structure is otherwise sound).
  if (rep.ok()) {
    try {
      topo_order(d);
    } catch (const Error& e) {
      issue("CycleError", e.what());
    }
  }
  return rep;
}

std::string ValidationReport::to_string() const {
  std::string s;
  for (const auto& i : issues) s += i.code + ": " + i.detail + "\n";
  return s;
}

void validate_or_throw(const Diagram& d) {
  ValidationReport r = validate(d);
  if (!r.ok()) throw Error(r.issues.front().code, r.to_string());
}

Diagram identity(std::vector<WireType> types) {
  Diagram d;
  d.inputs = types;
  d.outputs = std::move(types);
  for (std::size_t i = 0; i < d.inputs.size(); ++i)
    d.connect(kIn, int(i), kOut, int(i));
  return d;
}

namespace {

std::string unique_id(const std::set<std::string>& taken,
                      const std::string& base) {
  if (!taken.count(base)) return base;
  for (int k = 2;; ++k) {
    std::string cand = base + "#" + std::to_string(k);
    if (!taken.count(cand)) return cand;
  }
}

} // namespace

Diagram compose_seq(const Diagram& a, const Diagram& b) {
  if (a.outputs.size() != b.inputs.size())
    fail("TypeMismatch", "compose_seq: interface arity mismatch");
  for (std::size_t i = 0; i < a.outputs.size(); ++i)
    if (a.outputs[i] != b.inputs[i])
      fail("TypeMismatch", "compose_seq: wire " + std::to_string(i) + " " +
                               a.outputs[i].to_string() + " vs " +
                               b.inputs[i].to_string());

  Diagram r;
  r.inputs = a.inputs;
  r.outputs = b.outputs;
  r.nodes = a.nodes;

  // Producer feeding each of a's output slots.
  std::vector<PortRef> a_out(a.outputs.size());
  for (const Edge& e : a.edges) {
    if (e.to == kOut)
      a_out[e.to_port] = PortRef{e.from, e.from_port};
    else
      r.edges.push_back(e);
  }

  std::set<std::string> taken;
  for (const Box& n : r.nodes) taken.insert(n.id);
  std::map<std::string, std::string> rename;
  for (const Box& n : b.nodes) {
    std::string nid = unique_id(taken, n.id);
    taken.insert(nid);
    rename[n.id] = nid;
    Box copy = n;
    copy.id = nid;
    r.nodes.push_back(std::move(copy));
  }

  auto map_from = [&](const Edge& e) -> PortRef {
    if (e.from == kIn) return a_out[e.from_port];
    return PortRef{rename.at(e.from), e.from_port};
  };
  for (const Edge& e : b.edges) {
    PortRef src = map_from(e);
    std::string to = e.to == kOut ? kOut : rename.at(e.to);
    r.edges.push_back(Edge{src.node, src.port, to, e.to_port});
  }
  return r;
}

Diagram compose_par(const Diagram& a, const Diagram& b) {
  Diagram r;
  r.inputs = a.inputs;
  r.inputs.insert(r.inputs.end(), b.inputs.begin(), b.inputs.end());
  r.outputs = a.outputs;
  r.outputs.insert(r.outputs.end(), b.outputs.begin(), b.outputs.end());
  r.nodes = a.nodes;
  r.edges = a.edges;

  std::set<std::string> taken;
  for (const Box& n : r.nodes) taken.insert(n.id);
  std::map<std::string, std::string> rename;
  for (const Box& n : b.nodes) {
    std::string nid = unique_id(taken, n.id);
    taken.insert(nid);
    rename[n.id] = nid;
    Box copy = n;
    copy.id = nid;
    r.nodes.push_back(std::move(copy));
  }

  int in_off = int(a.inputs.size()), out_off = int(a.outputs.size());
  for (const Edge& e : b.edges) {
    Edge ne = e;
    if (ne.from == kIn)
      ne.from_port += in_off;
    else
      ne.from = rename.at(ne.from);
    if (ne.to == kOut)
      ne.to_port += out_off;
    else
      ne.to = rename.at(ne.to);
    r.edges.push_back(ne);
  }
  return r;
}

Wiring::Wiring(const Diagram& d) {
  for (const Edge& e : d.edges) {
    auto ck = std::make_pair(e.to, e.to_port);
    auto pk = std::make_pair(e.from, e.from_port);
    if (!by_consumer_.emplace(ck, PortRef{e.from, e.from_port}).second)
      fail("LinearityError", "consumer port fed twice: " + e.to + ":" +
                                 std::to_string(e.to_port));
    if (!by_producer_.emplace(pk, PortRef{e.to, e.to_port}).second)
      fail("LinearityError", "producer port used twice: " + e.from + ":" +
                                 std::to_string(e.from_port));
  }
}

PortRef Wiring::producer(const PortRef& consumer) const {
  auto it = by_consumer_.find({consumer.node, consumer.port});
  if (it == by_consumer_.end())
    fail("LinearityError", "unwired consumer port " + consumer.node + ":" +
                               std::to_string(consumer.port));
  return it->second;
}

PortRef Wiring::consumer(const PortRef& producer) const {
  auto it = by_producer_.find({producer.node, producer.port});
  if (it == by_producer_.end())
    fail("LinearityError", "unwired producer port " + producer.node + ":" +
                               std::to_string(producer.port));
  return it->second;
}

std::vector<int> topo_order(const Diagram& d) {
  int n = int(d.nodes.size());
  std::map<std::string, int> index;
  for (int i = 0; i < n; ++i) index[d.nodes[i].id] = i;

  std::vector<int> unmet(n, 0);
  std::vector<std::vector<int>> consumers(n);
  for (const Edge& e : d.edges) {
    if (e.from == kIn || e.to == kOut) continue;
    auto fi = index.find(e.from);
    auto ti = index.find(e.to);
    if (fi == index.end() || ti == index.end())
      fail("BadConfig", "edge references unknown node");
    unmet[ti->second]++;
    consumers[fi->second].push_back(ti->second);
  }

  std::set<int> ready;
  for (int i = 0; i < n; ++i)
    if (unmet[i] == 0) ready.insert(i);

  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    int i = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(i);
    for (int c : consumers[i])
      if (--unmet[c] == 0) ready.insert(c);
  }
  if (int(order.size()) != n)
    fail("CycleError", "diagram contains a cycle");
  return order;
}

} // namespace taskforge
