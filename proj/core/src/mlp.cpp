#include "taskforge/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "kernels.hpp"
#include "taskforge/errors.hpp"

namespace taskforge {

std::size_t MlpLayout::param_count() const {
  std::size_t n = 0;
  for (int l = 0; l < layer_count(); ++l)
    n += std::size_t(dims[l + 1]) * dims[l] + dims[l + 1];
  return n;
}

std::pair<int, int> MlpLayout::layer_offsets(int l) const {
  int off = 0;
  for (int i = 0; i < l; ++i) off += dims[i + 1] * dims[i] + dims[i + 1];
  return {off, off + dims[l + 1] * dims[l]};
}

std::size_t layout_param_count(const ParamLayout& l) {
  if (auto* m = std::get_if<MlpLayout>(&l)) return m->param_count();
  return std::size_t(std::get<VectorLayout>(l).n);
}

int layout_in_dim(const ParamLayout& l) {
  if (auto* m = std::get_if<MlpLayout>(&l)) return m->in_dim();
  return 0;
}

int layout_out_dim(const ParamLayout& l) {
  if (auto* m = std::get_if<MlpLayout>(&l)) return m->out_dim();
  return std::get<VectorLayout>(l).n;
}

void ParamStore::declare(const std::string& space, ParamLayout layout) {
  if (space.empty()) fail("BadConfig", "parameter space name must be non-empty");
  if (auto* m = std::get_if<MlpLayout>(&layout)) {
    if (m->dims.size() < 2 || m->acts.size() + 1 != m->dims.size())
      fail("BadConfig", "mlp layout for '" + space +
                            "' needs dims [in..out] and one activation per layer");
    for (int d : m->dims)
      if (d <= 0) fail("BadConfig", "mlp layout dims must be positive");
  } else if (std::get<VectorLayout>(layout).n <= 0) {
    fail("BadConfig", "vector layout needs positive size");
  }
  auto [it, inserted] = entries_.try_emplace(
      space, Entry{std::move(layout), Tensor({1, 0})});
  if (!inserted) fail("BadConfig", "parameter space '" + space + "' declared twice");
  it->second.flat = Tensor({1, int(layout_param_count(it->second.layout))});
  order_.push_back(space);
}

bool ParamStore::has(const std::string& space) const {
  return entries_.count(space) != 0;
}

const ParamLayout& ParamStore::layout(const std::string& space) const {
  auto it = entries_.find(space);
  if (it == entries_.end())
    fail("UnknownParamSpace", "'" + space + "' is not declared");
  return it->second.layout;
}

Tensor& ParamStore::flat(const std::string& space) {
  auto it = entries_.find(space);
  if (it == entries_.end())
    fail("UnknownParamSpace", "'" + space + "' is not declared");
  return it->second.flat;
}

const Tensor& ParamStore::flat(const std::string& space) const {
  auto it = entries_.find(space);
  if (it == entries_.end())
    fail("UnknownParamSpace", "'" + space + "' is not declared");
  return it->second.flat;
}

std::vector<std::string> ParamStore::spaces() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

void ParamStore::init(std::uint64_t seed) {
  Rng rng(seed);
  for (const std::string& space : order_) {
    Entry& e = entries_.at(space);
    Tensor& f = e.flat;
    std::fill(f.data(), f.data() + f.size(), 0.0f);
    if (auto* m = std::get_if<MlpLayout>(&e.layout)) {
      for (int l = 0; l < m->layer_count(); ++l) {
        auto [w_off, b_off] = m->layer_offsets(l);
        int fan_in = m->dims[l], fan_out = m->dims[l + 1];
        double bound = std::sqrt(6.0 / double(fan_in));
        for (int i = 0; i < fan_out * fan_in; ++i)
          f[std::size_t(w_off) + i] = float(rng.uniform(-bound, bound));
        // biases stay zero
      }
    }
    // vector layouts initialise to zero
  }
}

NodeId mlp_forward(Tape& t, NodeId x, NodeId params, const MlpLayout& layout) {
  NodeId h = x;
  for (int l = 0; l < layout.layer_count(); ++l) {
    auto [w_off, b_off] = layout.layer_offsets(l);
    h = t.linear(h, params, w_off, b_off, layout.dims[l], layout.dims[l + 1]);
    h = t.activation(h, layout.acts[l]);
  }
  return h;
}

Tensor mlp_forward_raw(const Tensor& x, const Tensor& flat,
                       const MlpLayout& layout) {
  if (x.cols() != layout.in_dim())
    fail("ShapeMismatch", "mlp_forward_raw: input dim mismatch");
  int B = x.rows();
  Tensor h = x;
  for (int l = 0; l < layout.layer_count(); ++l) {
    auto [w_off, b_off] = layout.layer_offsets(l);
    int in = layout.dims[l], out = layout.dims[l + 1];
    Tensor y({B, out});
    kernels::linear_forward(h.data(), flat.data() + w_off,
                            flat.data() + b_off, y.data(), B, in, out);
    switch (layout.acts[l]) {
      case Act::Linear: break;
      case Act::Relu:
        for (std::size_t i = 0; i < y.size(); ++i)
          y[i] = y[i] > 0.0f ? y[i] : 0.0f;
        break;
      case Act::LeakyRelu:
        for (std::size_t i = 0; i < y.size(); ++i)
          y[i] = y[i] > 0.0f ? y[i] : 0.1f * y[i];
        break;
      case Act::Sigmoid:
        for (std::size_t i = 0; i < y.size(); ++i)
          y[i] = float(1.0 / (1.0 + std::exp(-double(y[i]))));
        break;
      case Act::Softmax:
        for (int b = 0; b < B; ++b) {
          float* r = y.data() + std::size_t(b) * out;
          float mx = r[0];
          for (int i = 1; i < out; ++i) mx = std::max(mx, r[i]);
          double z = 0.0;
          for (int i = 0; i < out; ++i) z += std::exp(double(r[i]) - mx);
          for (int i = 0; i < out; ++i)
            r[i] = float(std::exp(double(r[i]) - mx) / z);
        }
        break;
    }
    h = std::move(y);
  }
  return h;
}

} // namespace taskforge
