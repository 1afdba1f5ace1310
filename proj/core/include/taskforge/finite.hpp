#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "taskforge/distribution.hpp"
#include "taskforge/rng.hpp"
#include "taskforge/tensor.hpp"

namespace taskforge {

// --- attribute distributions -------------------------------------------------

// The modeller's independent attribute distribution: either uniform over k
// one-hot classes (optionally pinned to a single class) or a clamped uniform
// scalar.
struct AttributeDistribution {
  enum class Kind { UniformDiscrete, ClampedUniform };
  Kind kind = Kind::UniformDiscrete;
  int classes = 0; // UniformDiscrete: one-hot width
  int fixed = -1;  // UniformDiscrete: >= 0 pins every draw to this class
  double lo = -0.1, hi = 1.1; // ClampedUniform: raw range before clamping
  double clamp_lo = 0.0, clamp_hi = 1.0;
};

// Redraws attribute rows independently of whatever data they were paired
// with. The column count must match the distribution's arity.
Tensor resample_attribute(const Tensor& attr, const AttributeDistribution& a,
                          Rng& rng);

// Registry adapter; t must be one-hot of width `classes` or a scalar wire.
std::shared_ptr<Sampler> make_attribute_sampler(WireType t,
                                                AttributeDistribution a);

// --- exact finite distributions ------------------------------------------------

struct FiniteDist {
  std::vector<std::string> support;
  std::vector<double> probs;

  int index_of(const std::string& label) const; // -1 when absent
};

// Validates: unique labels, nonnegative probs, total within 1e-12 of 1.
FiniteDist make_finite_dist(std::vector<std::string> support,
                            std::vector<double> probs);

// 0.5 * sum |p - q| over the union of supports (missing labels count as 0).
double total_variation(const FiniteDist& p, const FiniteDist& q);

// A joint distribution over pairs (d, a), stored densely.
struct JointFiniteDist {
  std::vector<std::string> d_support, a_support;
  std::vector<double> p; // [nd, na] row-major

  int d_count() const { return static_cast<int>(d_support.size()); }
  int a_count() const { return static_cast<int>(a_support.size()); }
  double at(int d, int a) const { return p[static_cast<std::size_t>(d) * a_support.size() + a]; }
};

JointFiniteDist make_joint(std::vector<std::string> d_support,
                           std::vector<std::string> a_support,
                           std::vector<double> p);

// A conditional probability kept as the unreduced fraction joint/marginal, so
// multiplying back by the marginal reproduces the joint entry bit for bit.
struct ExactFrac {
  double num = 0.0, den = 1.0;
  double value() const { return num / den; }
};

// The inverse kernel A -> Dist(D) of a joint, computed by Bayes' rule with
// exact bookkeeping: cond(a, d) = joint(d, a) / marginal(a).
struct BayesKernel {
  std::vector<std::string> d_support, a_support;
  std::vector<double> a_marginal; // [na]
  std::vector<ExactFrac> cond;    // [na, nd]

  const ExactFrac& at(int a, int d) const {
    return cond[static_cast<std::size_t>(a) * d_support.size() + d];
  }
  FiniteDist dist_given(int a) const;
};

// Requires every attribute marginal to be strictly positive (ZeroMarginal).
BayesKernel bayes_invert(const JointFiniteDist& joint);

// --- analytic manipulator from a latent split -----------------------------------

// An explicit bijection D <-> C x A: enc[d] = (c, a), with every (c, a) pair
// hit exactly once.
struct LatentSplit {
  int c_count = 0, a_count = 0;
  std::vector<std::pair<int, int>> enc; // [nd]
};

// Exact lookup tables for (get, put) over a finite support.
struct FiniteManipulator {
  std::vector<std::string> d_support, a_support;
  std::vector<double> pd;  // P(d)
  std::vector<int> get_a;  // [nd] -> attribute index
  std::vector<int> put_d;  // [nd, na] -> data index

  int d_count() const { return static_cast<int>(d_support.size()); }
  int a_count() const { return static_cast<int>(a_support.size()); }
  int get(int d) const { return get_a[static_cast<std::size_t>(d)]; }
  int put(int d, int a) const {
    return put_d[static_cast<std::size_t>(d) * a_support.size() + a];
  }
};

// Builds get = attribute component of enc and put(d, a') = dec(c-of-d, a').
// Verifies the bijection (BadBijection) and that the data distribution
// factorises into independent C and A marginals within 1e-12
// (NotEntropyBalanced).
FiniteManipulator latent_split_manipulator(const FiniteDist& data,
                                           const std::vector<std::string>& a_support,
                                           const LatentSplit& iso);

// Number of support points violating any of the four behavioural laws
// (Classify is exact by construction; PutGet, GetPut and Undo are checked by
// enumeration). Zero for every latent-split construction.
int manipulation_violations(const FiniteManipulator& m);

// Distribution of put(d, a) when d ~ P(d) and a is held fixed.
FiniteDist put_pushforward(const FiniteManipulator& m, int a);

// The joint (d, get(d)) induced by P(d) — the input bayes_invert expects.
JointFiniteDist manipulator_joint(const FiniteManipulator& m);

} // namespace taskforge
