#pragma once

#include <map>
#include <string>
#include <vector>

#include "taskforge/errors.hpp"

namespace taskforge {

enum class WireKind { Real, Nonneg, OneHot, Unit };

std::string wirekind_to_string(WireKind k);
WireKind wirekind_from_string(const std::string& s);

// Two ports connect only when name, dimension and kind all agree.
struct WireType {
  std::string name;
  int dim = 0;
  WireKind kind = WireKind::Real;

  bool operator==(const WireType& o) const {
    return name == o.name && dim == o.dim && kind == o.kind;
  }
  bool operator!=(const WireType& o) const { return !(*this == o); }
  std::string to_string() const;
};

enum class BoxKind { Learner, Fixed, Copy, Delete, Swap, State, Const };

std::string boxkind_to_string(BoxKind k);

// One node of a diagram. Which fields are meaningful depends on `kind`:
//   Learner: param (trainable parameter space id)
//   Fixed:   fn (registry id) + args (fn-specific constants)
//   State:   dist (distribution id)
//   Const:   value (length = out type dim); param optionally names a
//            trainable vector space that supplies the value instead
// Copy/Delete/Swap are fully described by their port types.
struct Box {
  std::string id;
  BoxKind kind = BoxKind::Fixed;
  std::string param;
  std::string fn;
  std::vector<float> args;
  std::string dist;
  std::vector<float> value;
  std::vector<WireType> ins;
  std::vector<WireType> outs;
};

Box learner_box(std::string id, std::string param, std::vector<WireType> ins,
                std::vector<WireType> outs);
Box fixed_box(std::string id, std::string fn, std::vector<float> args,
              std::vector<WireType> ins, std::vector<WireType> outs);
Box copy_box(std::string id, WireType t);
Box delete_box(std::string id, WireType t);
Box swap_box(std::string id, WireType a, WireType b);
Box state_box(std::string id, std::string dist, std::vector<WireType> outs);
Box const_box(std::string id, WireType t, std::vector<float> value,
              std::string trainable_param = "");

// Wire endpoints. Producers are box output ports or diagram input slots
// (node == "$in"); consumers are box input ports or diagram output slots
// (node == "$out").
inline constexpr const char* kIn = "$in";
inline constexpr const char* kOut = "$out";

struct PortRef {
  std::string node;
  int port = 0;
  bool operator==(const PortRef& o) const {
    return node == o.node && port == o.port;
  }
  bool operator<(const PortRef& o) const {
    return node != o.node ? node < o.node : port < o.port;
  }
};

struct Edge {
  std::string from; // producer node id or "$in"
  int from_port = 0;
  std::string to; // consumer node id or "$out"
  int to_port = 0;
};

// A typed port graph. Nodes keep insertion order; evaluation and rng
// consumption follow the insertion-stable topological order, so composing
// diagrams preserves draw streams.
struct Diagram {
  std::vector<WireType> inputs;
  std::vector<WireType> outputs;
  std::vector<Box> nodes;
  std::vector<Edge> edges;

  const Box& box(const std::string& id) const;
  Box& box(const std::string& id);
  bool has_node(const std::string& id) const;
  void add_node(Box b);
  void connect(const std::string& from, int from_port, const std::string& to,
               int to_port);
};

struct ValidationIssue {
  std::string code;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
  std::string to_string() const;
};

// Structural checks: references, port ranges, type agreement on every edge,
// wire linearity (each producer feeds exactly one consumer and vice versa),
// acyclicity, interface coverage, fixed-function typing.
ValidationReport validate(const Diagram& d);
void validate_or_throw(const Diagram& d);

// Identity on the given interface: inputs wired straight to outputs.
Diagram identity(std::vector<WireType> types);

// Sequential composition: a's outputs feed b's inputs (types must agree
// position-wise). Node ids from `b` are renamed when they collide with `a`'s.
Diagram compose_seq(const Diagram& a, const Diagram& b);

// Parallel composition (side by side).
Diagram compose_par(const Diagram& a, const Diagram& b);

// Resolved wiring of a structurally sane diagram.
class Wiring {
public:
  explicit Wiring(const Diagram& d);

  // Producer feeding the given consumer port ("$out" for output slots).
  PortRef producer(const PortRef& consumer) const;
  // Consumer fed by the given producer port ("$in" for input slots).
  PortRef consumer(const PortRef& producer) const;

private:
  std::map<std::pair<std::string, int>, PortRef> by_consumer_;
  std::map<std::pair<std::string, int>, PortRef> by_producer_;
};

// Insertion-stable topological order of node indices (Kahn, ready set keyed
// by insertion index). Throws CycleError on cycles.
std::vector<int> topo_order(const Diagram& d);

// Type of a producer / consumer endpoint.
WireType producer_type(const Diagram& d, const PortRef& p);
WireType consumer_type(const Diagram& d, const PortRef& p);

} // namespace taskforge
