#include "refgrad.hpp"

#include <algorithm>
#include <cmath>

#include "taskforge/errors.hpp"

namespace taskforge::ref {

namespace {

// Guard values mirror the float32 engine bit for bit.
const double kLeaky = double(0.1f);
const double kLogGuard = 1e-12;
const double kBceGuard = double(1e-7f);

void affine(const std::vector<double>& in, const std::vector<double>& flat,
            int w_off, int b_off, int din, int dout,
            std::vector<double>& out) {
  out.assign(std::size_t(dout), 0.0);
  for (int j = 0; j < dout; ++j) {
    double s = flat[std::size_t(b_off + j)];
    const double* wr = flat.data() + w_off + std::size_t(j) * din;
    for (int i = 0; i < din; ++i) s += wr[i] * in[std::size_t(i)];
    out[std::size_t(j)] = s;
  }
}

void activate(std::vector<double>& v, Act a,
              std::vector<std::int8_t>* signature) {
  switch (a) {
    case Act::Linear: break;
    case Act::Relu:
      for (double& x : v) {
        if (signature) signature->push_back(x > 0.0 ? 1 : 0);
        x = x > 0.0 ? x : 0.0;
      }
      break;
    case Act::LeakyRelu:
      for (double& x : v) {
        if (signature) signature->push_back(x > 0.0 ? 1 : 0);
        x = x > 0.0 ? x : kLeaky * x;
      }
      break;
    case Act::Sigmoid:
      for (double& x : v) x = 1.0 / (1.0 + std::exp(-x));
      break;
    case Act::Softmax: {
      double mx = v[0];
      for (double x : v) mx = std::max(mx, x);
      double z = 0.0;
      for (double x : v) z += std::exp(x - mx);
      for (double& x : v) x = std::exp(x - mx) / z;
      break;
    }
  }
}

std::vector<double> forward_row(const std::vector<double>& x,
                                const std::vector<double>& flat,
                                const MlpLayout& layout,
                                std::vector<std::int8_t>* signature) {
  std::vector<double> h = x, next;
  for (int l = 0; l < layout.layer_count(); ++l) {
    auto [w_off, b_off] = layout.layer_offsets(l);
    affine(h, flat, w_off, b_off, layout.dims[std::size_t(l)],
           layout.dims[std::size_t(l) + 1], next);
    activate(next, layout.acts[std::size_t(l)], signature);
    h.swap(next);
  }
  return h;
}

double div_row(DivKind k, const std::vector<double>& u,
               const std::vector<double>& v,
               std::vector<std::int8_t>* signature) {
  int d = int(u.size());
  switch (k) {
    case DivKind::L2: {
      double s = 0.0;
      for (int i = 0; i < d; ++i) {
        double e = u[std::size_t(i)] - v[std::size_t(i)];
        s += e * e;
      }
      return s;
    }
    case DivKind::L1: {
      double s = 0.0;
      for (int i = 0; i < d; ++i) {
        double e = u[std::size_t(i)] - v[std::size_t(i)];
        if (signature) signature->push_back(e > 0.0 ? 1 : 0);
        s += std::abs(e);
      }
      return s;
    }
    case DivKind::BCE: {
      double s = 0.0;
      for (int i = 0; i < d; ++i) {
        double ue =
            std::min(1.0 - kBceGuard, std::max(kBceGuard, u[std::size_t(i)]));
        double vv = v[std::size_t(i)];
        s -= vv * std::log(ue) + (1.0 - vv) * std::log(1.0 - ue);
      }
      return s;
    }
    case DivKind::CE: {
      double s = 0.0;
      for (int i = 0; i < d; ++i)
        s -= v[std::size_t(i)] *
             std::log(std::max(kLogGuard, u[std::size_t(i)]));
      return s;
    }
    case DivKind::KLGauss: {
      int half = d / 2;
      double s = 0.0;
      for (int i = 0; i < half; ++i) {
        double mu = u[std::size_t(i)], su = u[std::size_t(half + i)];
        double mv = v[std::size_t(i)], sv = v[std::size_t(half + i)];
        double su2 = std::max(kLogGuard, su * su);
        double sv2 = std::max(kLogGuard, sv * sv);
        double dm = mu - mv;
        s += 0.5 * (std::log(sv2 / su2) + (su2 + dm * dm) / sv2 - 1.0);
      }
      return s;
    }
    case DivKind::SSIM: {
      const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
      double mu = 0, mv = 0;
      for (int i = 0; i < d; ++i) {
        mu += u[std::size_t(i)];
        mv += v[std::size_t(i)];
      }
      mu /= d;
      mv /= d;
      double vu = 0, vv2 = 0, cov = 0;
      for (int i = 0; i < d; ++i) {
        double eu = u[std::size_t(i)] - mu, ev = v[std::size_t(i)] - mv;
        vu += eu * eu;
        vv2 += ev * ev;
        cov += eu * ev;
      }
      vu /= d;
      vv2 /= d;
      cov /= d;
      double S = ((2 * mu * mv + C1) * (2 * cov + C2)) /
                 ((mu * mu + mv * mv + C1) * (vu + vv2 + C2));
      return 1.0 - S;
    }
  }
  fail("BadConfig", "unknown divergence kind");
}

} // namespace

double loss_f64(const std::vector<std::vector<double>>& x,
                const std::vector<double>& flat, const MlpLayout& layout,
                const Divergence& div,
                const std::vector<std::vector<double>>& target,
                std::vector<std::int8_t>* signature) {
  double total = 0.0;
  for (std::size_t b = 0; b < x.size(); ++b) {
    std::vector<double> y = forward_row(x[b], flat, layout, signature);
    double s = 0.0;
    for (const auto& [w, k] : div.terms)
      s += double(w) * div_row(k, y, target[b], signature);
    total += s;
  }
  return total / double(x.size());
}

} // namespace taskforge::ref
