#pragma once

#include <memory>
#include <map>
#include <string>
#include <vector>

#include "taskforge/diagram.hpp"
#include "taskforge/mlp.hpp"
#include "taskforge/rng.hpp"
#include "taskforge/tensor.hpp"

namespace taskforge {

class DistRegistry;

// Shared context for evaluation and sampling. Model-dependent samplers (push-
// forwards, recursive constructions) read current parameter values from here;
// their samples are plain data, never gradient paths.
struct EvalContext {
  const ParamStore* params = nullptr;
  const DistRegistry* dists = nullptr;
};

// A distribution over a tuple of typed wires. sample() returns one [batch,
// dim] tensor per component and must consume a deterministic number of rng
// draws for a given batch size and registry state.
class Sampler {
public:
  virtual ~Sampler() = default;
  virtual std::vector<WireType> types() const = 0;
  virtual std::vector<Tensor> sample(int batch, Rng& rng,
                                     const EvalContext& ctx) const = 0;
};

class DistRegistry {
public:
  void add(const std::string& name, std::shared_ptr<Sampler> s);
  bool has(const std::string& name) const;
  const Sampler& get(const std::string& name) const;
  std::vector<std::string> names() const;

  // Derived-distribution helpers; register under a deterministic name (reused
  // when already present) and return it.
  std::string project(const std::string& base, const std::vector<int>& comps);
  std::string product(const std::string& a, const std::string& b);

private:
  std::map<std::string, std::shared_ptr<Sampler>> map_;
};

// --- basic samplers ---------------------------------------------------------

// No components; used by atoms whose diagrams have empty input interfaces.
std::shared_ptr<Sampler> make_unit_sampler();

// Independent N(mu, sigma^2) coordinates on one wire.
std::shared_ptr<Sampler> make_gaussian_sampler(WireType t, double mu,
                                               double sigma);

// Uniform one-hot vectors on one wire (dim = number of classes).
std::shared_ptr<Sampler> make_onehot_uniform_sampler(WireType t);

// Uniform on [lo, hi] then clamped into [clamp_lo, clamp_hi]; scalar wire.
std::shared_ptr<Sampler> make_clamped_uniform_sampler(WireType t, double lo,
                                                      double hi,
                                                      double clamp_lo,
                                                      double clamp_hi);

// Empirical distribution over the rows of one or more aligned tensors: a
// shared row index is drawn uniformly per sample, so the columns of one draw
// stay correlated (e.g. an image with its label).
std::shared_ptr<Sampler> make_table_sampler(std::vector<Tensor> columns,
                                            std::vector<WireType> types);

// Components `comps` of the named base distribution (one correlated draw).
// The base must already be registered, so the component types are known.
std::shared_ptr<Sampler> make_projection_sampler(const DistRegistry& reg,
                                                 std::string base,
                                                 std::vector<int> comps);

// Independent draws from two named distributions, components concatenated.
std::shared_ptr<Sampler> make_product_sampler(const DistRegistry& reg,
                                              std::string a, std::string b);

// Pushes a base distribution through a (deterministic) diagram using current
// parameter values; components become the diagram's outputs.
std::shared_ptr<Sampler> make_pushforward_sampler(std::string base,
                                                  Diagram via);

// Recursive stack construction: components (container, item). Containers are
// built by folding `push` over `depth ~ uniform{0..max_depth-1}` fresh items
// starting from the trainable base vector; the paired item is drawn fresh.
std::shared_ptr<Sampler> make_stack_sampler(std::string item_dist, Diagram push,
                                            std::string base_param,
                                            WireType container_type,
                                            int max_depth);

} // namespace taskforge
