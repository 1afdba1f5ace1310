#pragma once

// Double-precision reference forward pass for the `gradcheck` command.
// Central finite differences at h = 1e-3 need more headroom than float32
// arithmetic can give (the difference of two float32 losses carries ~1e-7
// relative noise, which h divides up to ~1e-4), so the perturbed losses are
// evaluated here in double precision with the same formulas and guard
// constants as the float32 engine.

#include <cstdint>
#include <vector>

#include "taskforge/divergence.hpp"
#include "taskforge/mlp.hpp"

namespace taskforge::ref {

// mean over batch of divergence(mlp(x), target); x is [B][in], target
// [B][out], flat the parameter block as doubles. When `signature` is given
// it records which side of each piecewise kink the evaluation landed on
// (Relu/LeakyRelu pre-activation signs plus, for L1 terms, the signs of
// y - target). A finite-difference probe is only meaningful when the base
// and both perturbed evaluations share a signature: a sign flip means the
// probe straddles a kink, where the two-sided difference measures no
// derivative at all.
double loss_f64(const std::vector<std::vector<double>>& x,
                const std::vector<double>& flat, const MlpLayout& layout,
                const Divergence& div,
                const std::vector<std::vector<double>>& target,
                std::vector<std::int8_t>* signature = nullptr);

} // namespace taskforge::ref
