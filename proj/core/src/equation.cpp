#include "taskforge/equation.hpp"

#include <algorithm>
#include <sstream>

#include "taskforge/canonical.hpp"
#include "taskforge/errors.hpp"

namespace taskforge {

std::string equation_canonical(const TaskEquation& e) {
  std::string a = canonical_form(e.lhs);
  std::string b = canonical_form(e.rhs);
  if (b < a) std::swap(a, b);
  std::ostringstream out;
  out << "eq{dist=" << e.dist << ";train=[";
  bool first = true;
  for (auto& s : e.trainable) {
    if (!first) out << ",";
    out << s;
    first = false;
  }
  out << "];" << a << " == " << b << "}";
  return out.str();
}

std::uint64_t equation_hash(const TaskEquation& e) {
  return fnv1a(equation_canonical(e));
}

bool equation_trivial(const TaskEquation& e) {
  return canonical_form(e.lhs) == canonical_form(e.rhs);
}

EquationSet::EquationSet(std::vector<TaskEquation> eqs) {
  for (auto& e : eqs) add(std::move(e));
}

const TaskEquation& EquationSet::at(int i) const {
  if (i < 0 || i >= size())
    fail("BadEquationIndex", "equation index " + std::to_string(i) +
                                 " out of range (size " + std::to_string(size()) +
                                 ")");
  return items_[static_cast<std::size_t>(i)];
}

bool EquationSet::contains_canonical(const std::string& c, int skip) const {
  for (int i = 0; i < size(); ++i) {
    if (i == skip) continue;
    if (equation_canonical(items_[static_cast<std::size_t>(i)]) == c) return true;
  }
  return false;
}

bool EquationSet::add(TaskEquation e) {
  if (contains_canonical(equation_canonical(e))) return false;
  items_.push_back(std::move(e));
  return true;
}

void EquationSet::replace(int i, std::vector<TaskEquation> with) {
  at(i); // bounds check
  std::vector<TaskEquation> kept;
  for (auto& e : with) {
    std::string c = equation_canonical(e);
    bool dup = contains_canonical(c, i);
    for (auto& k : kept)
      if (equation_canonical(k) == c) dup = true;
    if (!dup) kept.push_back(std::move(e));
  }
  items_.erase(items_.begin() + i);
  items_.insert(items_.begin() + i, kept.begin(), kept.end());
}

std::string EquationSet::canonical() const {
  std::vector<std::string> cs;
  for (auto& e : items_) cs.push_back(equation_canonical(e));
  std::sort(cs.begin(), cs.end());
  std::ostringstream out;
  out << "set{";
  for (std::size_t i = 0; i < cs.size(); ++i) out << (i ? "\n" : "") << cs[i];
  out << "}";
  return out.str();
}

std::uint64_t EquationSet::hash() const { return fnv1a(canonical()); }

} // namespace taskforge
