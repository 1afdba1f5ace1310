#include "taskforge/optim.hpp"

#include <cmath>

#include "taskforge/errors.hpp"

namespace taskforge {

void AdamW::step(ParamStore& params,
                 const std::map<std::string, Tensor>& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (const auto& [space, g] : grads) {
    Tensor& theta = params.flat(space);
    if (g.size() != theta.size())
      fail("ShapeMismatch", "gradient size mismatch for '" + space + "'");
    Moments& mom = state_[space];
    if (mom.m.empty()) {
      mom.m = Tensor({1, int(theta.size())});
      mom.v = Tensor({1, int(theta.size())});
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      double gi = double(g[i]);
      if (cfg_.clip > 0.0)
        gi = std::min(cfg_.clip, std::max(-cfg_.clip, gi));
      double m = cfg_.beta1 * double(mom.m[i]) + (1.0 - cfg_.beta1) * gi;
      double v = cfg_.beta2 * double(mom.v[i]) + (1.0 - cfg_.beta2) * gi * gi;
      mom.m[i] = float(m);
      mom.v[i] = float(v);
      double mhat = m / bc1;
      double vhat = v / bc2;
      double upd = mhat / (std::sqrt(vhat) + cfg_.eps) +
                   cfg_.weight_decay * double(theta[i]);
      theta[i] = float(double(theta[i]) - cfg_.lr * upd);
    }
  }
}

} // namespace taskforge
