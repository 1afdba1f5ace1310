#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "taskforge/rng.hpp"
#include "taskforge/tape.hpp"
#include "taskforge/tensor.hpp"

namespace taskforge {

// Fully connected network: dims = [in, h1, ..., out], one activation per
// affine layer. Parameters live in one flat block laid out layer by layer,
// W (row-major [out, in]) then bias.
struct MlpLayout {
  std::vector<int> dims;
  std::vector<Act> acts;

  int in_dim() const { return dims.front(); }
  int out_dim() const { return dims.back(); }
  int layer_count() const { return int(dims.size()) - 1; }
  std::size_t param_count() const;
  // Offsets of (W, b) for layer l within the flat block.
  std::pair<int, int> layer_offsets(int l) const;
};

// A bare trainable vector (used by trainable constant boxes).
struct VectorLayout {
  int n = 0;
};

using ParamLayout = std::variant<MlpLayout, VectorLayout>;

std::size_t layout_param_count(const ParamLayout& l);
int layout_in_dim(const ParamLayout& l);   // 0 for vectors
int layout_out_dim(const ParamLayout& l);  // n for vectors

// Named parameter spaces. Initialisation is Kaiming-uniform on weight
// matrices (bound sqrt(6 / fan_in)), zero biases, zero vectors; draws happen
// in registration order, so a store built from the same layouts and seed is
// reproducible bit for bit.
class ParamStore {
public:
  void declare(const std::string& space, ParamLayout layout);
  bool has(const std::string& space) const;
  const ParamLayout& layout(const std::string& space) const;
  Tensor& flat(const std::string& space);
  const Tensor& flat(const std::string& space) const;
  std::vector<std::string> spaces() const; // sorted

  // (Re)initialises every declared space from the seed.
  void init(std::uint64_t seed);

private:
  struct Entry {
    ParamLayout layout;
    Tensor flat;
  };
  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_; // registration order, drives init draws
};

// Tape forward pass through the layout. `params` is a tape leaf holding the
// flat block (see Tape::param_leaf).
NodeId mlp_forward(Tape& t, NodeId x, NodeId params, const MlpLayout& layout);

// Gradient-free forward pass.
Tensor mlp_forward_raw(const Tensor& x, const Tensor& flat,
                       const MlpLayout& layout);

} // namespace taskforge
