#include "taskforge/finite.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "taskforge/errors.hpp"

namespace taskforge {

// --- attribute distributions -------------------------------------------------

Tensor resample_attribute(const Tensor& attr, const AttributeDistribution& a,
                          Rng& rng) {
  Tensor out = Tensor::zeros(attr.rows(), attr.cols());
  if (a.kind == AttributeDistribution::Kind::UniformDiscrete) {
    if (attr.cols() != a.classes)
      fail("TypeMismatch", "attribute has " + std::to_string(attr.cols()) +
                               " columns but the distribution has " +
                               std::to_string(a.classes) + " classes");
    if (a.fixed >= a.classes)
      fail("TypeMismatch", "pinned class is out of range");
    for (int r = 0; r < out.rows(); ++r) {
      int k = a.fixed >= 0 ? a.fixed
                           : static_cast<int>(rng.below(
                                 static_cast<std::uint64_t>(a.classes)));
      for (int c = 0; c < out.cols(); ++c) out.at(r, c) = c == k ? 1.0f : 0.0f;
    }
  } else {
    if (attr.cols() != 1)
      fail("TypeMismatch", "a clamped-uniform attribute is a single column");
    for (int r = 0; r < out.rows(); ++r) {
      double v = rng.uniform(a.lo, a.hi);
      out.at(r, 0) = static_cast<float>(std::clamp(v, a.clamp_lo, a.clamp_hi));
    }
  }
  return out;
}

namespace {

class AttributeSampler final : public Sampler {
public:
  AttributeSampler(WireType t, AttributeDistribution a)
      : type_(std::move(t)), a_(a) {
    int want = a_.kind == AttributeDistribution::Kind::UniformDiscrete
                   ? a_.classes
                   : 1;
    if (type_.dim != want)
      fail("TypeMismatch", "wire dim does not match the attribute arity");
  }

  std::vector<WireType> types() const override { return {type_}; }

  std::vector<Tensor> sample(int batch, Rng& rng,
                             const EvalContext& ctx) const override {
    (void)ctx;
    Tensor blank = Tensor::zeros(batch, type_.dim);
    std::vector<Tensor> out;
    out.push_back(resample_attribute(blank, a_, rng));
    return out;
  }

private:
  WireType type_;
  AttributeDistribution a_;
};

} // namespace

std::shared_ptr<Sampler> make_attribute_sampler(WireType t,
                                                AttributeDistribution a) {
  return std::make_shared<AttributeSampler>(std::move(t), a);
}

// --- exact finite distributions ------------------------------------------------

int FiniteDist::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < support.size(); ++i)
    if (support[i] == label) return static_cast<int>(i);
  return -1;
}

FiniteDist make_finite_dist(std::vector<std::string> support,
                            std::vector<double> probs) {
  if (support.size() != probs.size() || support.empty())
    fail("BadConfig", "a finite distribution needs one probability per point");
  std::set<std::string> seen;
  for (auto& s : support)
    if (!seen.insert(s).second)
      fail("DuplicatePoint", "support label '" + s + "' repeats");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) fail("BadConfig", "probabilities must be nonnegative");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-12)
    fail("BadConfig", "probabilities sum to " + std::to_string(total));
  return FiniteDist{std::move(support), std::move(probs)};
}

double total_variation(const FiniteDist& p, const FiniteDist& q) {
  std::map<std::string, double> diff;
  for (std::size_t i = 0; i < p.support.size(); ++i)
    diff[p.support[i]] += p.probs[i];
  for (std::size_t i = 0; i < q.support.size(); ++i)
    diff[q.support[i]] -= q.probs[i];
  double tv = 0.0;
  for (auto& [label, d] : diff) tv += std::fabs(d);
  return 0.5 * tv;
}

JointFiniteDist make_joint(std::vector<std::string> d_support,
                           std::vector<std::string> a_support,
                           std::vector<double> p) {
  if (d_support.empty() || a_support.empty())
    fail("BadConfig", "a joint needs nonempty supports");
  if (p.size() != d_support.size() * a_support.size())
    fail("BadConfig", "a joint needs one entry per (d, a) pair");
  for (auto* side : {&d_support, &a_support}) {
    std::set<std::string> seen;
    for (auto& s : *side)
      if (!seen.insert(s).second)
        fail("DuplicatePoint", "support label '" + s + "' repeats");
  }
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) fail("BadConfig", "probabilities must be nonnegative");
    total += v;
  }
  if (std::fabs(total - 1.0) > 1e-12)
    fail("BadConfig", "joint probabilities sum to " + std::to_string(total));
  return JointFiniteDist{std::move(d_support), std::move(a_support), std::move(p)};
}

FiniteDist BayesKernel::dist_given(int a) const {
  std::vector<double> probs;
  probs.reserve(d_support.size());
  for (std::size_t d = 0; d < d_support.size(); ++d)
    probs.push_back(at(a, static_cast<int>(d)).value());
  return FiniteDist{d_support, std::move(probs)};
}

BayesKernel bayes_invert(const JointFiniteDist& joint) {
  const int nd = joint.d_count(), na = joint.a_count();
  BayesKernel k;
  k.d_support = joint.d_support;
  k.a_support = joint.a_support;
  k.a_marginal.assign(static_cast<std::size_t>(na), 0.0);
  for (int a = 0; a < na; ++a) {
    double m = 0.0;
    for (int d = 0; d < nd; ++d) m += joint.at(d, a);
    if (!(m > 0.0))
      fail("ZeroMarginal", "attribute '" + joint.a_support[static_cast<std::size_t>(a)] +
                               "' has probability zero");
    k.a_marginal[static_cast<std::size_t>(a)] = m;
  }
  k.cond.resize(static_cast<std::size_t>(na) * nd);
  for (int a = 0; a < na; ++a)
    for (int d = 0; d < nd; ++d)
      k.cond[static_cast<std::size_t>(a) * nd + d] =
          ExactFrac{joint.at(d, a), k.a_marginal[static_cast<std::size_t>(a)]};
  return k;
}

// --- analytic manipulator --------------------------------------------------------

FiniteManipulator latent_split_manipulator(
    const FiniteDist& data, const std::vector<std::string>& a_support,
    const LatentSplit& iso) {
  const int nd = static_cast<int>(data.support.size());
  const int nc = iso.c_count, na = iso.a_count;
  if (static_cast<int>(a_support.size()) != na)
    fail("BadBijection", "attribute support size does not match the split");
  if (static_cast<int>(iso.enc.size()) != nd || nc * na != nd)
    fail("BadBijection", "the split must pair every data point with one (c, a)");

  // dec is the inverse table of enc; filling it checks bijectivity.
  std::vector<int> dec(static_cast<std::size_t>(nd), -1);
  for (int d = 0; d < nd; ++d) {
    auto [c, a] = iso.enc[static_cast<std::size_t>(d)];
    if (c < 0 || c >= nc || a < 0 || a >= na)
      fail("BadBijection", "encoded pair out of range");
    int slot = c * na + a;
    if (dec[static_cast<std::size_t>(slot)] != -1)
      fail("BadBijection", "two data points encode to the same (c, a)");
    dec[static_cast<std::size_t>(slot)] = d;
  }

  // The split must make C and A independent under the data distribution.
  std::vector<double> pc(static_cast<std::size_t>(nc), 0.0);
  std::vector<double> pa(static_cast<std::size_t>(na), 0.0);
  for (int d = 0; d < nd; ++d) {
    auto [c, a] = iso.enc[static_cast<std::size_t>(d)];
    pc[static_cast<std::size_t>(c)] += data.probs[static_cast<std::size_t>(d)];
    pa[static_cast<std::size_t>(a)] += data.probs[static_cast<std::size_t>(d)];
  }
  for (int d = 0; d < nd; ++d) {
    auto [c, a] = iso.enc[static_cast<std::size_t>(d)];
    double product = pc[static_cast<std::size_t>(c)] * pa[static_cast<std::size_t>(a)];
    if (std::fabs(product - data.probs[static_cast<std::size_t>(d)]) > 1e-12)
      fail("NotEntropyBalanced",
           "P(d) does not factorise through the split at '" +
               data.support[static_cast<std::size_t>(d)] + "'");
  }

  FiniteManipulator m;
  m.d_support = data.support;
  m.a_support = a_support;
  m.pd = data.probs;
  m.get_a.resize(static_cast<std::size_t>(nd));
  m.put_d.resize(static_cast<std::size_t>(nd) * na);
  for (int d = 0; d < nd; ++d) {
    auto [c, a] = iso.enc[static_cast<std::size_t>(d)];
    m.get_a[static_cast<std::size_t>(d)] = a;
    for (int ap = 0; ap < na; ++ap)
      m.put_d[static_cast<std::size_t>(d) * na + ap] =
          dec[static_cast<std::size_t>(c * na + ap)];
  }
  return m;
}

int manipulation_violations(const FiniteManipulator& m) {
  int bad = 0;
  for (int d = 0; d < m.d_count(); ++d) {
    if (m.put(d, m.get(d)) != d) ++bad; // GetPut
    for (int a = 0; a < m.a_count(); ++a) {
      if (m.get(m.put(d, a)) != a) ++bad;              // PutGet
      if (m.put(m.put(d, a), m.get(d)) != d) ++bad;    // Undo
    }
  }
  return bad;
}

FiniteDist put_pushforward(const FiniteManipulator& m, int a) {
  std::vector<double> probs(static_cast<std::size_t>(m.d_count()), 0.0);
  for (int d = 0; d < m.d_count(); ++d)
    probs[static_cast<std::size_t>(m.put(d, a))] +=
        m.pd[static_cast<std::size_t>(d)];
  return FiniteDist{m.d_support, std::move(probs)};
}

JointFiniteDist manipulator_joint(const FiniteManipulator& m) {
  std::vector<double> p(static_cast<std::size_t>(m.d_count()) * m.a_count(), 0.0);
  for (int d = 0; d < m.d_count(); ++d)
    p[static_cast<std::size_t>(d) * m.a_count() + m.get(d)] =
        m.pd[static_cast<std::size_t>(d)];
  return JointFiniteDist{m.d_support, m.a_support, std::move(p)};
}

} // namespace taskforge
