#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "taskforge/diagram.hpp"

namespace taskforge {

// An equation between two diagrams with the same interface, read as "both
// sides agree on samples from `dist`". `trainable` lists the parameter
// spaces the equation is allowed to bend.
struct TaskEquation {
  std::string name;
  Diagram lhs;
  Diagram rhs;
  std::string dist;
  std::set<std::string> trainable;
};

// Side order is irrelevant: the canonical string of (l, r) equals that of
// (r, l). Includes dist and trainable set.
std::string equation_canonical(const TaskEquation& e);
std::uint64_t equation_hash(const TaskEquation& e);

// Whether both sides are canonically identical (a tautology).
bool equation_trivial(const TaskEquation& e);

// Ordered, duplicate-free collection of equations. Rewrites address
// equations by index; replacing one splices its replacements in place and
// drops any that duplicate an equation already present.
class EquationSet {
public:
  EquationSet() = default;
  explicit EquationSet(std::vector<TaskEquation> eqs);

  int size() const { return static_cast<int>(items_.size()); }
  const TaskEquation& at(int i) const;
  const std::vector<TaskEquation>& items() const { return items_; }

  // Appends unless an equal equation is already present; returns whether the
  // equation was inserted.
  bool add(TaskEquation e);

  // Replaces items_[i] by `with` (deduplicated against the rest and within).
  void replace(int i, std::vector<TaskEquation> with);

  // Canonical form of the whole set: sorted member canonicals.
  std::string canonical() const;
  std::uint64_t hash() const;

private:
  bool contains_canonical(const std::string& c, int skip = -1) const;
  std::vector<TaskEquation> items_;
};

} // namespace taskforge
