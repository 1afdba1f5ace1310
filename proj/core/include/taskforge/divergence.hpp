#pragma once

#include <string>
#include <utility>
#include <vector>

#include "taskforge/tape.hpp"

namespace taskforge {

enum class DivKind { L2, L1, BCE, CE, KLGauss, SSIM };

DivKind divkind_from_string(const std::string& s);
std::string divkind_to_string(DivKind k);

// A divergence selection for one objective term: either a primitive kind or a
// weighted combination of primitives (weights must be strictly positive).
struct Divergence {
  std::vector<std::pair<float, DivKind>> terms;

  static Divergence primitive(DivKind k) { return {{{1.0f, k}}}; }
  static Divergence composite(std::vector<std::pair<float, DivKind>> ts);

  bool valid() const;
  std::string to_string() const;
};

// True when D(u, v) >= 0 with equality exactly at u == v. Only this family is
// eligible for the positivity-collapse rewrite.
bool divergence_is_positive(const Divergence& d);
bool divkind_is_positive(DivKind k);

// Per-sample application: [B,d] x [B,d] -> [B,1].
NodeId divergence_apply(Tape& t, const Divergence& d, NodeId u, NodeId v);

} // namespace taskforge
