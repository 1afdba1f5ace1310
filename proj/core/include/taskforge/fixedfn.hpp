#pragma once

#include <string>
#include <vector>

#include "taskforge/diagram.hpp"
#include "taskforge/rng.hpp"
#include "taskforge/tape.hpp"

namespace taskforge {

// Registry of permitted Fixed-box functions:
//   add, subtract        T, T -> T
//   wadd                 T, T -> T           args = (w1, w2)
//   concat               A, B -> C           dim C = dim A + dim B
//   split                C -> A, B           dim A + dim B = dim C
//   clamp                T -> T'             args = (lo, hi), dims equal
//   gaussian_sampler     P -> L              P rows are (mu ‖ sigma), dim P = 2 dim L
//   sqdist, absdist      T, T -> nonneg(1)   divergence boxes (positive)
struct FixedFnInfo {
  bool known = false;
  bool stochastic = false;
  bool positive_divergence = false;
};

FixedFnInfo fixed_info(const std::string& fn);

// Returns "" when the box interface satisfies the function's type rule.
std::string fixed_typecheck(const Box& b);

// Applies the function on the tape. Stochastic functions draw from `rng`.
std::vector<NodeId> fixed_eval(Tape& t, const Box& b,
                               const std::vector<NodeId>& ins, Rng& rng);

} // namespace taskforge
