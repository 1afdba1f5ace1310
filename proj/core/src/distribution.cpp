#include "taskforge/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "taskforge/errors.hpp"
#include "taskforge/evaluate.hpp"

namespace taskforge {

void DistRegistry::add(const std::string& name, std::shared_ptr<Sampler> s) {
  if (!s) fail("NullSampler", "distribution '" + name + "' is null");
  if (map_.count(name))
    fail("DuplicateDistribution", "distribution '" + name + "' already registered");
  map_[name] = std::move(s);
}

bool DistRegistry::has(const std::string& name) const { return map_.count(name) > 0; }

const Sampler& DistRegistry::get(const std::string& name) const {
  auto it = map_.find(name);
  if (it == map_.end())
    fail("UnknownDistribution", "distribution '" + name + "' not registered");
  return *it->second;
}

std::vector<std::string> DistRegistry::names() const {
  std::vector<std::string> out;
  for (auto& [k, v] : map_) out.push_back(k);
  return out;
}

namespace {

class UnitSampler final : public Sampler {
public:
  std::vector<WireType> types() const override { return {}; }
  std::vector<Tensor> sample(int, Rng&, const EvalContext&) const override {
    return {};
  }
};

class GaussianSampler final : public Sampler {
public:
  GaussianSampler(WireType t, double mu, double sigma)
      : t_(std::move(t)), mu_(mu), sigma_(sigma) {}
  std::vector<WireType> types() const override { return {t_}; }
  std::vector<Tensor> sample(int batch, Rng& rng, const EvalContext&) const override {
    Tensor x = Tensor::zeros({batch, t_.dim});
    for (std::size_t i = 0; i < x.size(); ++i)
      x.data()[i] = static_cast<float>(mu_ + sigma_ * rng.gaussian());
    return {x};
  }

private:
  WireType t_;
  double mu_, sigma_;
};

class OneHotUniformSampler final : public Sampler {
public:
  explicit OneHotUniformSampler(WireType t) : t_(std::move(t)) {}
  std::vector<WireType> types() const override { return {t_}; }
  std::vector<Tensor> sample(int batch, Rng& rng, const EvalContext&) const override {
    Tensor x = Tensor::zeros({batch, t_.dim});
    for (int b = 0; b < batch; ++b)
      x.at(b, static_cast<int>(rng.below(static_cast<std::uint64_t>(t_.dim)))) = 1.0f;
    return {x};
  }

private:
  WireType t_;
};

class ClampedUniformSampler final : public Sampler {
public:
  ClampedUniformSampler(WireType t, double lo, double hi, double clo, double chi)
      : t_(std::move(t)), lo_(lo), hi_(hi), clo_(clo), chi_(chi) {}
  std::vector<WireType> types() const override { return {t_}; }
  std::vector<Tensor> sample(int batch, Rng& rng, const EvalContext&) const override {
    Tensor x = Tensor::zeros({batch, t_.dim});
    for (std::size_t i = 0; i < x.size(); ++i) {
      double v = rng.uniform(lo_, hi_);
      x.data()[i] = static_cast<float>(std::min(chi_, std::max(clo_, v)));
    }
    return {x};
  }

private:
  WireType t_;
  double lo_, hi_, clo_, chi_;
};

class ProjectionSampler final : public Sampler {
public:
  ProjectionSampler(std::string base, std::vector<int> comps)
      : base_(std::move(base)), comps_(std::move(comps)) {}
  std::vector<WireType> types() const override { return types_; }
  std::vector<Tensor> sample(int batch, Rng& rng, const EvalContext& ctx) const override {
    if (!ctx.dists) fail("MissingRegistry", "projection sampler needs a registry");
    auto all = ctx.dists->get(base_).sample(batch, rng, ctx);
    std::vector<Tensor> out;
    for (int c : comps_) out.push_back(all.at(static_cast<std::size_t>(c)));
    return out;
  }
  void resolve_types(const DistRegistry& reg) {
    auto base_types = reg.get(base_).types();
    for (int c : comps_) {
      if (c < 0 || c >= static_cast<int>(base_types.size()))
        fail("BadProjection", "component index out of range for '" + base_ + "'");
      types_.push_back(base_types[static_cast<std::size_t>(c)]);
    }
  }

private:
  std::string base_;
  std::vector<int> comps_;
  std::vector<WireType> types_;
};

class ProductSampler final : public Sampler {
public:
  ProductSampler(std::string a, std::string b) : a_(std::move(a)), b_(std::move(b)) {}
  std::vector<WireType> types() const override { return types_; }
  std::vector<Tensor> sample(int batch, Rng& rng, const EvalContext& ctx) const override {
    if (!ctx.dists) fail("MissingRegistry", "product sampler needs a registry");
    auto xs = ctx.dists->get(a_).sample(batch, rng, ctx);
    auto ys = ctx.dists->get(b_).sample(batch, rng, ctx);
    for (auto& y : ys) xs.push_back(std::move(y));
    return xs;
  }
  void resolve_types(const DistRegistry& reg) {
    types_ = reg.get(a_).types();
    for (auto& t : reg.get(b_).types()) types_.push_back(t);
  }

private:
  std::string a_, b_;
  std::vector<WireType> types_;
};

class TableSampler final : public Sampler {
public:
  TableSampler(std::vector<Tensor> columns, std::vector<WireType> types)
      : columns_(std::move(columns)), types_(std::move(types)) {
    if (columns_.empty() || columns_.size() != types_.size())
      fail("BadConfig", "a table needs one type per column");
    rows_ = columns_[0].rows();
    if (rows_ <= 0) fail("BadConfig", "a table needs at least one row");
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      if (columns_[c].rows() != rows_)
        fail("ShapeMismatch", "table columns have different row counts");
      if (columns_[c].cols() != types_[c].dim)
        fail("DimMismatch", "table column " + std::to_string(c) +
                                " does not match its wire dim");
    }
  }

  std::vector<WireType> types() const override { return types_; }

  std::vector<Tensor> sample(int batch, Rng& rng,
                             const EvalContext& ctx) const override {
    (void)ctx;
    std::vector<Tensor> out;
    for (auto& t : types_) out.push_back(Tensor::zeros(batch, t.dim));
    for (int b = 0; b < batch; ++b) {
      auto row = static_cast<int>(rng.below(static_cast<std::uint64_t>(rows_)));
      for (std::size_t c = 0; c < columns_.size(); ++c) {
        const float* src = columns_[c].data() +
                           static_cast<std::size_t>(row) * columns_[c].cols();
        std::copy(src, src + columns_[c].cols(),
                  out[c].data() + static_cast<std::size_t>(b) * out[c].cols());
      }
    }
    return out;
  }

private:
  std::vector<Tensor> columns_;
  std::vector<WireType> types_;
  int rows_ = 0;
};

class PushforwardSampler final : public Sampler {
public:
  PushforwardSampler(std::string base, Diagram via)
      : base_(std::move(base)), via_(std::move(via)) {
    validate_or_throw(via_);
  }
  std::vector<WireType> types() const override { return via_.outputs; }
  std::vector<Tensor> sample(int batch, Rng& rng, const EvalContext& ctx) const override {
    if (!ctx.dists || !ctx.params)
      fail("MissingContext", "pushforward sampler needs params and registry");
    auto xs = ctx.dists->get(base_).sample(batch, rng, ctx);
    return evaluate(via_, xs, *ctx.params, rng, ctx.dists);
  }

private:
  std::string base_;
  Diagram via_;
};

class StackSampler final : public Sampler {
public:
  StackSampler(std::string item_dist, Diagram push, std::string base_param,
               WireType container_type, int max_depth)
      : item_(std::move(item_dist)), push_(std::move(push)),
        base_(std::move(base_param)), ct_(std::move(container_type)),
        max_depth_(max_depth) {
    validate_or_throw(push_);
    if (max_depth_ < 1) fail("BadDepth", "stack sampler needs max_depth >= 1");
    if (push_.inputs.size() != 2 || push_.outputs.size() != 1)
      fail("BadPushShape", "stack push diagram must map (container,item) to container");
  }

  std::vector<WireType> types() const override {
    return {ct_, push_.inputs[1]};
  }

  std::vector<Tensor> sample(int batch, Rng& rng, const EvalContext& ctx) const override {
    if (!ctx.dists || !ctx.params)
      fail("MissingContext", "stack sampler needs params and registry");
    const Tensor& bot = ctx.params->flat(base_);
    if (static_cast<int>(bot.size()) != ct_.dim)
      fail("BadBaseParam", "stack base vector has wrong size");
    std::vector<int> depth(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b)
      depth[static_cast<std::size_t>(b)] =
          static_cast<int>(rng.below(static_cast<std::uint64_t>(max_depth_)));
    Tensor s = Tensor::zeros({batch, ct_.dim});
    for (int b = 0; b < batch; ++b)
      for (int j = 0; j < ct_.dim; ++j) s.at(b, j) = bot.data()[static_cast<std::size_t>(j)];
    const Sampler& items = ctx.dists->get(item_);
    for (int level = 1; level < max_depth_; ++level) {
      std::vector<int> rows;
      for (int b = 0; b < batch; ++b)
        if (depth[static_cast<std::size_t>(b)] >= level) rows.push_back(b);
      if (rows.empty()) continue;
      int g = static_cast<int>(rows.size());
      Tensor xs = items.sample(g, rng, ctx).at(0);
      Tensor sub = Tensor::zeros({g, ct_.dim});
      for (int r = 0; r < g; ++r)
        for (int j = 0; j < ct_.dim; ++j)
          sub.at(r, j) = s.at(rows[static_cast<std::size_t>(r)], j);
      Tensor pushed = evaluate(push_, {sub, xs}, *ctx.params, rng, ctx.dists).at(0);
      for (int r = 0; r < g; ++r)
        for (int j = 0; j < ct_.dim; ++j)
          s.at(rows[static_cast<std::size_t>(r)], j) = pushed.at(r, j);
    }
    Tensor x = items.sample(batch, rng, ctx).at(0);
    return {s, x};
  }

private:
  std::string item_;
  Diagram push_;
  std::string base_;
  WireType ct_;
  int max_depth_;
};

} // namespace

std::string DistRegistry::project(const std::string& base, const std::vector<int>& comps) {
  std::ostringstream name;
  name << base << ".proj(";
  for (std::size_t i = 0; i < comps.size(); ++i)
    name << (i ? "," : "") << comps[i];
  name << ")";
  std::string n = name.str();
  if (!has(n)) {
    auto s = std::make_shared<ProjectionSampler>(base, comps);
    s->resolve_types(*this);
    add(n, s);
  }
  return n;
}

std::string DistRegistry::product(const std::string& a, const std::string& b) {
  std::string n = a + "*" + b;
  if (!has(n)) {
    auto s = std::make_shared<ProductSampler>(a, b);
    s->resolve_types(*this);
    add(n, s);
  }
  return n;
}

std::shared_ptr<Sampler> make_unit_sampler() { return std::make_shared<UnitSampler>(); }

std::shared_ptr<Sampler> make_gaussian_sampler(WireType t, double mu, double sigma) {
  return std::make_shared<GaussianSampler>(std::move(t), mu, sigma);
}

std::shared_ptr<Sampler> make_onehot_uniform_sampler(WireType t) {
  if (t.kind != WireKind::OneHot)
    fail("BadWireKind", "one-hot sampler needs a one-hot wire type");
  return std::make_shared<OneHotUniformSampler>(std::move(t));
}

std::shared_ptr<Sampler> make_clamped_uniform_sampler(WireType t, double lo, double hi,
                                                      double clamp_lo, double clamp_hi) {
  return std::make_shared<ClampedUniformSampler>(std::move(t), lo, hi, clamp_lo, clamp_hi);
}

std::shared_ptr<Sampler> make_table_sampler(std::vector<Tensor> columns,
                                            std::vector<WireType> types) {
  return std::make_shared<TableSampler>(std::move(columns), std::move(types));
}

std::shared_ptr<Sampler> make_projection_sampler(const DistRegistry& reg,
                                                 std::string base,
                                                 std::vector<int> comps) {
  auto s = std::make_shared<ProjectionSampler>(std::move(base), std::move(comps));
  s->resolve_types(reg);
  return s;
}

std::shared_ptr<Sampler> make_product_sampler(const DistRegistry& reg,
                                              std::string a, std::string b) {
  auto s = std::make_shared<ProductSampler>(std::move(a), std::move(b));
  s->resolve_types(reg);
  return s;
}

std::shared_ptr<Sampler> make_pushforward_sampler(std::string base, Diagram via) {
  return std::make_shared<PushforwardSampler>(std::move(base), std::move(via));
}

std::shared_ptr<Sampler> make_stack_sampler(std::string item_dist, Diagram push,
                                            std::string base_param,
                                            WireType container_type, int max_depth) {
  return std::make_shared<StackSampler>(std::move(item_dist), std::move(push),
                                        std::move(base_param),
                                        std::move(container_type), max_depth);
}

} // namespace taskforge
