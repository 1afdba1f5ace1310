#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "taskforge/rng.hpp"
#include "taskforge/tensor.hpp"

namespace taskforge {

using NodeId = int;

enum class Act { Linear, Relu, LeakyRelu, Sigmoid, Softmax };

Act act_from_string(const std::string& s);
std::string act_to_string(Act a);

// Record of primitive operations for reverse-mode differentiation. Values are
// [batch, dim] tensors. A node created from a named parameter space routes its
// gradient into `param_grads()` during backward(); parameters loaded through
// an empty space name behave as constants, which is how per-atom gradient
// masking is realised (stop-gradient at the parameter leaf).
class Tape {
public:
  struct Node {
    Tensor value;
    std::vector<NodeId> parents;
    std::function<void(Tape&, NodeId)> backward; // nullptr for leaves
    std::string param_space;                     // parameter leaves only
  };

  // --- leaves -------------------------------------------------------------
  NodeId leaf(Tensor v);
  // Parameter leaf holding a full flat parameter block. `space` may be empty,
  // in which case the values take part in the computation but receive no
  // gradient.
  NodeId param_leaf(const std::string& space, const Tensor& flat);

  // --- affine / shape ------------------------------------------------------
  // y = x * W^T + b with W = params[w_off .. w_off+out*in) row-major [out,in]
  // and b = params[b_off .. b_off+out).
  NodeId linear(NodeId x, NodeId params, int w_off, int b_off, int in,
                int out);
  // y[b,:] = params[off .. off+n) for every row; `rows` fixes the batch size.
  NodeId broadcast_param(NodeId params, int off, int n, int rows);
  NodeId concat(const std::vector<NodeId>& xs);
  NodeId slice(NodeId x, int from, int to);

  // --- pointwise -----------------------------------------------------------
  NodeId activation(NodeId x, Act a);
  NodeId add(NodeId x, NodeId y);
  NodeId sub(NodeId x, NodeId y);
  NodeId wadd(NodeId x, NodeId y, float wx, float wy);
  NodeId scale(NodeId x, float c);
  NodeId clamp(NodeId x, float lo, float hi);

  // --- stochastic ----------------------------------------------------------
  // x = [B, 2k] rows (mu ‖ sigma); returns mu + sigma .* eps with
  // eps ~ N(0,1)^k drawn row-major from `rng` (exactly B*k gaussians).
  NodeId gauss_sample(NodeId x, Rng& rng);

  // --- per-sample divergences, [B,d] x [B,d] -> [B,1] ----------------------
  NodeId div_l2(NodeId u, NodeId v);
  NodeId div_l1(NodeId u, NodeId v);
  NodeId div_bce(NodeId u, NodeId v);
  NodeId div_ce(NodeId u, NodeId v);
  NodeId div_klgauss(NodeId u, NodeId v); // rows are (mu ‖ sigma)
  NodeId div_ssim(NodeId u, NodeId v);    // 1 - global SSIM, values in [0,1]

  // --- reducers ------------------------------------------------------------
  NodeId mean_batch(NodeId x);                       // [B,1] -> [1,1]
  NodeId wsum(const std::vector<NodeId>& xs,
              const std::vector<float>& ws);         // scalars -> scalar
  // E_b[H(p_b)] - H(E_b[p_b]) for probability rows p; in [-ln K, 0].
  NodeId entropy_reg(NodeId p);

  // --- access --------------------------------------------------------------
  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  const Node& node(NodeId id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  // Runs reverse accumulation from a [1,1] loss node. May be called once per
  // tape. Gradients for parameter leaves with non-empty space land in
  // param_grads().
  void backward(NodeId loss);

  Tensor& grad(NodeId id);
  const std::map<std::string, Tensor>& param_grads() const {
    return param_grads_;
  }
  std::map<std::string, Tensor>& param_grads() { return param_grads_; }

private:
  NodeId push(Node n);
  Tensor& ensure_grad(NodeId id);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::map<std::string, Tensor> param_grads_;
};

} // namespace taskforge
