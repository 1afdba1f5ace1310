#include "taskforge/tape.hpp"

#include <algorithm>
#include <cmath>

#include "kernels.hpp"
#include "taskforge/errors.hpp"

namespace taskforge {

Act act_from_string(const std::string& s) {
  if (s == "linear" || s == "identity" || s == "id") return Act::Linear;
  if (s == "relu") return Act::Relu;
  if (s == "leaky_relu" || s == "leaky-relu") return Act::LeakyRelu;
  if (s == "sigmoid") return Act::Sigmoid;
  if (s == "softmax") return Act::Softmax;
  fail("BadConfig", "unknown activation '" + s + "'");
}

std::string act_to_string(Act a) {
  switch (a) {
    case Act::Linear: return "linear";
    case Act::Relu: return "relu";
    case Act::LeakyRelu: return "leaky_relu";
    case Act::Sigmoid: return "sigmoid";
    case Act::Softmax: return "softmax";
  }
  return "?";
}

namespace {

constexpr float kLeakySlope = 0.1f;
constexpr double kLogGuard = 1e-12;
constexpr float kBceGuard = 1e-7f;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    fail("ShapeMismatch", std::string(op) + ": " + a.shape_str() + " vs " +
                              b.shape_str());
}

} // namespace

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  grads_.emplace_back();
  return NodeId(nodes_.size()) - 1;
}

Tensor& Tape::ensure_grad(NodeId id) {
  Tensor& g = grads_[id];
  if (g.empty() && !nodes_[id].value.empty())
    g = Tensor({nodes_[id].value.rows(), nodes_[id].value.cols()});
  return g;
}

Tensor& Tape::grad(NodeId id) { return ensure_grad(id); }

NodeId Tape::leaf(Tensor v) { return push(Node{std::move(v), {}, nullptr, ""}); }

NodeId Tape::param_leaf(const std::string& space, const Tensor& flat) {
  Tensor v({1, int(flat.size())},
           std::vector<float>(flat.data(), flat.data() + flat.size()));
  return push(Node{std::move(v), {}, nullptr, space});
}

NodeId Tape::linear(NodeId x, NodeId params, int w_off, int b_off, int in,
                    int out) {
  const Tensor& X = nodes_[x].value;
  const Tensor& P = nodes_[params].value;
  if (X.cols() != in) fail("ShapeMismatch", "linear: input dim mismatch");
  if (std::size_t(w_off) + std::size_t(in) * out > P.size() ||
      std::size_t(b_off) + out > P.size())
    fail("ShapeMismatch", "linear: parameter block out of range");
  int B = X.rows();
  Tensor Y({B, out});
  kernels::linear_forward(X.data(), P.data() + w_off, P.data() + b_off,
                          Y.data(), B, in, out);
  Node n{std::move(Y), {x, params}, nullptr, ""};
  n.backward = [w_off, b_off, in, out, B](Tape& t, NodeId self) {
    const Tensor& dY = t.grads_[self];
    const Node& me = t.nodes_[self];
    NodeId xi = me.parents[0], pi = me.parents[1];
    kernels::linear_backward_input(dY.data(),
                                   t.nodes_[pi].value.data() + w_off,
                                   t.ensure_grad(xi).data(), B, in, out);
    const std::string& space = t.nodes_[pi].param_space;
    if (!space.empty()) {
      Tensor& pg = t.param_grads_[space];
      if (pg.empty()) pg = Tensor({1, int(t.nodes_[pi].value.size())});
      kernels::linear_backward_params(dY.data(), t.nodes_[xi].value.data(),
                                      pg.data() + w_off, pg.data() + b_off, B,
                                      in, out);
    }
  };
  return push(std::move(n));
}

NodeId Tape::broadcast_param(NodeId params, int off, int n, int rows) {
  const Tensor& P = nodes_[params].value;
  if (std::size_t(off) + n > P.size())
    fail("ShapeMismatch", "broadcast_param: block out of range");
  Tensor Y({rows, n});
  for (int b = 0; b < rows; ++b)
    std::copy(P.data() + off, P.data() + off + n, Y.data() + std::size_t(b) * n);
  Node nd{std::move(Y), {params}, nullptr, ""};
  nd.backward = [off, n, rows](Tape& t, NodeId self) {
    const Tensor& dY = t.grads_[self];
    NodeId pi = t.nodes_[self].parents[0];
    const std::string& space = t.nodes_[pi].param_space;
    if (space.empty()) return;
    Tensor& pg = t.param_grads_[space];
    if (pg.empty()) pg = Tensor({1, int(t.nodes_[pi].value.size())});
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int b = 0; b < rows; ++b) s += double(dY.at(b, i));
      pg[std::size_t(off) + i] += float(s);
    }
  };
  return push(std::move(nd));
}

NodeId Tape::concat(const std::vector<NodeId>& xs) {
  if (xs.empty()) fail("ShapeMismatch", "concat: no inputs");
  int B = nodes_[xs[0]].value.rows();
  int total = 0;
  for (NodeId x : xs) {
    if (nodes_[x].value.rows() != B)
      fail("ShapeMismatch", "concat: batch mismatch");
    total += nodes_[x].value.cols();
  }
  Tensor Y({B, total});
  int at = 0;
  for (NodeId x : xs) {
    const Tensor& X = nodes_[x].value;
    int d = X.cols();
    for (int b = 0; b < B; ++b)
      std::copy(X.data() + std::size_t(b) * d, X.data() + std::size_t(b) * d + d,
                Y.data() + std::size_t(b) * total + at);
    at += d;
  }
  Node n{std::move(Y), xs, nullptr, ""};
  n.backward = [B, total](Tape& t, NodeId self) {
    const Tensor& dY = t.grads_[self];
    int at = 0;
    for (NodeId x : t.nodes_[self].parents) {
      Tensor& dX = t.ensure_grad(x);
      int d = dX.cols();
      for (int b = 0; b < B; ++b)
        for (int i = 0; i < d; ++i)
          dX.at(b, i) += dY[std::size_t(b) * total + at + i];
      at += d;
    }
  };
  return push(std::move(n));
}

NodeId Tape::slice(NodeId x, int from, int to) {
  const Tensor& X = nodes_[x].value;
  if (from < 0 || to > X.cols() || from >= to)
    fail("ShapeMismatch", "slice: bad range");
  int B = X.rows(), d = to - from, stride = X.cols();
  Tensor Y({B, d});
  for (int b = 0; b < B; ++b)
    std::copy(X.data() + std::size_t(b) * stride + from,
              X.data() + std::size_t(b) * stride + to,
              Y.data() + std::size_t(b) * d);
  Node n{std::move(Y), {x}, nullptr, ""};
  n.backward = [from, d, stride, B](Tape& t, NodeId self) {
    const Tensor& dY = t.grads_[self];
    Tensor& dX = t.ensure_grad(t.nodes_[self].parents[0]);
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < d; ++i)
        dX[std::size_t(b) * stride + from + i] += dY[std::size_t(b) * d + i];
  };
  return push(std::move(n));
}

NodeId Tape::activation(NodeId x, Act a) {
  if (a == Act::Linear) return x;
  const Tensor& X = nodes_[x].value;
  int B = X.rows(), d = X.cols();
  Tensor Y({B, d});
  switch (a) {
    case Act::Relu:
      for (std::size_t i = 0; i < X.size(); ++i)
        Y[i] = X[i] > 0.0f ? X[i] : 0.0f;
      break;
    case Act::LeakyRelu:
      for (std::size_t i = 0; i < X.size(); ++i)
        Y[i] = X[i] > 0.0f ? X[i] : kLeakySlope * X[i];
      break;
    case Act::Sigmoid:
      for (std::size_t i = 0; i < X.size(); ++i)
        Y[i] = float(1.0 / (1.0 + std::exp(-double(X[i]))));
      break;
    case Act::Softmax:
      for (int b = 0; b < B; ++b) {
        const float* xr = X.data() + std::size_t(b) * d;
        float* yr = Y.data() + std::size_t(b) * d;
        float mx = xr[0];
        for (int i = 1; i < d; ++i) mx = std::max(mx, xr[i]);
        double z = 0.0;
        for (int i = 0; i < d; ++i) z += std::exp(double(xr[i]) - mx);
        for (int i = 0; i < d; ++i)
          yr[i] = float(std::exp(double(xr[i]) - mx) / z);
      }
      break;
    case Act::Linear: break;
  }
  Node n{std::move(Y), {x}, nullptr, ""};
  n.backward = [a, B, d](Tape& t, NodeId self) {
    const Tensor& dY = t.grads_[self];
    const Tensor& Y = t.nodes_[self].value;
    NodeId xi = t.nodes_[self].parents[0];
    const Tensor& X = t.nodes_[xi].value;
    Tensor& dX = t.ensure_grad(xi);
    switch (a) {
      case Act::Relu:
        for (std::size_t i = 0; i < X.size(); ++i)
          if (X[i] > 0.0f) dX[i] += dY[i];
        break;
      case Act::LeakyRelu:
        for (std::size_t i = 0; i < X.size(); ++i)
          dX[i] += X[i] > 0.0f ? dY[i] : kLeakySlope * dY[i];
        break;
      case Act::Sigmoid:
        for (std::size_t i = 0; i < X.size(); ++i)
          dX[i] += dY[i] * Y[i] * (1.0f - Y[i]);
        break;
      case Act::Softmax:
        for (int b = 0; b < B; ++b) {
          const float* yr = Y.data() + std::size_t(b) * d;
          const float* gr = dY.data() + std::size_t(b) * d;
          double dot = 0.0;
          for (int i = 0; i < d; ++i) dot += double(gr[i]) * yr[i];
          for (int i = 0; i < d; ++i)
            dX[std::size_t(b) * d + i] += float((double(gr[i]) - dot) * yr[i]);
        }
        break;
      case Act::Linear: break;
    }
  };
  return push(std::move(n));
}

NodeId Tape::add(NodeId x, NodeId y) { return wadd(x, y, 1.0f, 1.0f); }
NodeId Tape::sub(NodeId x, NodeId y) { return wadd(x, y, 1.0f, -1.0f); }

NodeId Tape::wadd(NodeId x, NodeId y, float wx, float wy) {
  const Tensor& X = nodes_[x].value;
  const Tensor& Y = nodes_[y].value;
  check_same_shape(X, Y, "wadd");
  Tensor Z({X.rows(), X.cols()});
  for (std::size_t i = 0; i < X.size(); ++i) Z[i] = wx * X[i] + wy * Y[i];
  Node n{std::move(Z), {x, y}, nullptr, ""};
  n.backward = [wx, wy](Tape& t, NodeId self) {
    const Tensor& dZ = t.grads_[self];
    Tensor& dX = t.ensure_grad(t.nodes_[self].parents[0]);
    Tensor& dY = t.ensure_grad(t.nodes_[self].parents[1]);
    for (std::size_t i = 0; i < dZ.size(); ++i) {
      dX[i] += wx * dZ[i];
      dY[i] += wy * dZ[i];
    }
  };
  return push(std::move(n));
}

NodeId Tape::scale(NodeId x, float c) {
  const Tensor& X = nodes_[x].value;
  Tensor Y({X.rows(), X.cols()});
  for (std::size_t i = 0; i < X.size(); ++i) Y[i] = c * X[i];
  Node n{std::move(Y), {x}, nullptr, ""};
  n.backward = [c](Tape& t, NodeId self) {
    const Tensor& dY = t.grads_[self];
    Tensor& dX = t.ensure_grad(t.nodes_[self].parents[0]);
    for (std::size_t i = 0; i < dY.size(); ++i) dX[i] += c * dY[i];
  };
  return push(std::move(n));
}

NodeId Tape::clamp(NodeId x, float lo, float hi) {
  const Tensor& X = nodes_[x].value;
  Tensor Y({X.rows(), X.cols()});
  for (std::size_t i = 0; i < X.size(); ++i)
    Y[i] = std::min(hi, std::max(lo, X[i]));
  Node n{std::move(Y), {x}, nullptr, ""};
  n.backward = [lo, hi](Tape& t, NodeId self) {
    const Tensor& dY = t.grads_[self];
    NodeId xi = t.nodes_[self].parents[0];
    const Tensor& X = t.nodes_[xi].value;
    Tensor& dX = t.ensure_grad(xi);
    for (std::size_t i = 0; i < dY.size(); ++i)
      if (X[i] >= lo && X[i] <= hi) dX[i] += dY[i];
  };
  return push(std::move(n));
}

NodeId Tape::gauss_sample(NodeId x, Rng& rng) {
  const Tensor& X = nodes_[x].value;
  if (X.cols() % 2 != 0)
    fail("ShapeMismatch", "gauss_sample: needs (mu ‖ sigma) rows");
  int B = X.rows(), k = X.cols() / 2;
  Tensor eps({B, k});
  for (std::size_t i = 0; i < eps.size(); ++i)
    eps[i] = float(rng.gaussian());
  Tensor Y({B, k});
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < k; ++i)
      Y.at(b, i) = X.at(b, i) + X.at(b, k + i) * eps.at(b, i);
  Node n{std::move(Y), {x}, nullptr, ""};
  n.backward = [B, k, eps = std::move(eps)](Tape& t, NodeId self) {
    const Tensor& dY = t.grads_[self];
    Tensor& dX = t.ensure_grad(t.nodes_[self].parents[0]);
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < k; ++i) {
        dX.at(b, i) += dY.at(b, i);
        dX.at(b, k + i) += dY.at(b, i) * eps.at(b, i);
      }
  };
  return push(std::move(n));
}

NodeId Tape::div_l2(NodeId u, NodeId v) {
  const Tensor& U = nodes_[u].value;
  const Tensor& V = nodes_[v].value;
  check_same_shape(U, V, "div_l2");
  int B = U.rows(), d = U.cols();
  Tensor Y({B, 1});
  for (int b = 0; b < B; ++b) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
      double e = double(U.at(b, i)) - double(V.at(b, i));
      s += e * e;
    }
    Y.at(b, 0) = float(s);
  }
  Node n{std::move(Y), {u, v}, nullptr, ""};
  n.backward = [B, d](Tape& t, NodeId self) {
    const Tensor& dY = t.grads_[self];
    const Tensor& U = t.nodes_[t.nodes_[self].parents[0]].value;
    const Tensor& V = t.nodes_[t.nodes_[self].parents[1]].value;
    Tensor& dU = t.ensure_grad(t.nodes_[self].parents[0]);
    Tensor& dV = t.ensure_grad(t.nodes_[self].parents[1]);
    for (int b = 0; b < B; ++b) {
      float g = dY.at(b, 0);
      for (int i = 0; i < d; ++i) {
        float e = 2.0f * (U.at(b, i) - V.at(b, i));
        dU.at(b, i) += g * e;
        dV.at(b, i) -= g * e;
      }
    }
  };
  return push(std::move(n));
}

NodeId Tape::div_l1(NodeId u, NodeId v) {
  const Tensor& U = nodes_[u].value;
  const Tensor& V = nodes_[v].value;
  check_same_shape(U, V, "div_l1");
  int B = U.rows(), d = U.cols();
  Tensor Y({B, 1});
  for (int b = 0; b < B; ++b) {
    double s = 0.0;
    for (int i = 0; i < d; ++i)
      s += std::abs(double(U.at(b, i)) - double(V.at(b, i)));
    Y.at(b, 0) = float(s);
  }
  Node n{std::move(Y), {u, v}, nullptr, ""};
  n.backward = [B, d](Tape& t, NodeId self) {
    const Tensor& dY = t.grads_[self];
    const Tensor& U = t.nodes_[t.nodes_[self].parents[0]].value;
    const Tensor& V = t.nodes_[t.nodes_[self].parents[1]].value;
    Tensor& dU = t.ensure_grad(t.nodes_[self].parents[0]);
    Tensor& dV = t.ensure_grad(t.nodes_[self].parents[1]);
    for (int b = 0; b < B; ++b) {
      float g = dY.at(b, 0);
      for (int i = 0; i < d; ++i) {
        float e = U.at(b, i) - V.at(b, i);
        float s = e > 0.0f ? 1.0f : (e < 0.0f ? -1.0f : 0.0f);
        dU.at(b, i) += g * s;
        dV.at(b, i) -= g * s;
      }
    }
  };
  return push(std::move(n));
}

NodeId Tape::div_bce(NodeId u, NodeId v) {
  const Tensor& U = nodes_[u].value;
  const Tensor& V = nodes_[v].value;
  check_same_shape(U, V, "div_bce");
  int B = U.rows(), d = U.cols();
  Tensor Y({B, 1});
  for (int b = 0; b < B; ++b) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
      double ue = std::min(1.0 - double(kBceGuard),
                           std::max(double(kBceGuard), double(U.at(b, i))));
      double vv = double(V.at(b, i));
      s -= vv * std::log(ue) + (1.0 - vv) * std::log(1.0 - ue);
    }
    Y.at(b, 0) = float(s);
  }
  Node n{std::move(Y), {u, v}, nullptr, ""};
  n.backward = [B, d](Tape& t, NodeId self) {
    const Tensor& dY = t.grads_[self];
    const Tensor& U = t.nodes_[t.nodes_[self].parents[0]].value;
    const Tensor& V = t.nodes_[t.nodes_[self].parents[1]].value;
    Tensor& dU = t.ensure_grad(t.nodes_[self].parents[0]);
    Tensor& dV = t.ensure_grad(t.nodes_[self].parents[1]);
    for (int b = 0; b < B; ++b) {
      float g = dY.at(b, 0);
      for (int i = 0; i < d; ++i) {
        float uu = U.at(b, i), vv = V.at(b, i);
        if (uu > kBceGuard && uu < 1.0f - kBceGuard)
          dU.at(b, i) += g * (uu - vv) / (uu * (1.0f - uu));
        double ue = std::min(1.0 - double(kBceGuard),
                             std::max(double(kBceGuard), double(uu)));
        dV.at(b, i) += g * float(std::log(1.0 - ue) - std::log(ue));
      }
    }
  };
  return push(std::move(n));
}

NodeId Tape::div_ce(NodeId u, NodeId v) {
  const Tensor& U = nodes_[u].value;
  const Tensor& V = nodes_[v].value;
  check_same_shape(U, V, "div_ce");
  int B = U.rows(), d = U.cols();
  Tensor Y({B, 1});
  for (int b = 0; b < B; ++b) {
    double s = 0.0;
    for (int i = 0; i < d; ++i)
      s -= double(V.at(b, i)) *
           std::log(std::max(kLogGuard, double(U.at(b, i))));
    Y.at(b, 0) = float(s);
  }
  Node n{std::move(Y), {u, v}, nullptr, ""};
  n.backward = [B, d](Tape& t, NodeId self) {
    const Tensor& dY = t.grads_[self];
    const Tensor& U = t.nodes_[t.nodes_[self].parents[0]].value;
    const Tensor& V = t.nodes_[t.nodes_[self].parents[1]].value;
    Tensor& dU = t.ensure_grad(t.nodes_[self].parents[0]);
    Tensor& dV = t.ensure_grad(t.nodes_[self].parents[1]);
    for (int b = 0; b < B; ++b) {
      float g = dY.at(b, 0);
      for (int i = 0; i < d; ++i) {
        double uu = double(U.at(b, i));
        if (uu > kLogGuard) dU.at(b, i) -= g * float(double(V.at(b, i)) / uu);
        dV.at(b, i) -= g * float(std::log(std::max(kLogGuard, uu)));
      }
    }
  };
  return push(std::move(n));
}

NodeId Tape::div_klgauss(NodeId u, NodeId v) {
  const Tensor& U = nodes_[u].value;
  const Tensor& V = nodes_[v].value;
  check_same_shape(U, V, "div_klgauss");
  if (U.cols() % 2 != 0)
    fail("ShapeMismatch", "div_klgauss: rows must be (mu ‖ sigma)");
  int B = U.rows(), k = U.cols() / 2;
  Tensor Y({B, 1});
  for (int b = 0; b < B; ++b) {
    double s = 0.0;
    for (int i = 0; i < k; ++i) {
      double mu = U.at(b, i), su = U.at(b, k + i);
      double mv = V.at(b, i), sv = V.at(b, k + i);
      double su2 = std::max(kLogGuard, su * su);
      double sv2 = std::max(kLogGuard, sv * sv);
      double dm = mu - mv;
      s += 0.5 * (std::log(sv2 / su2) + (su2 + dm * dm) / sv2 - 1.0);
    }
    Y.at(b, 0) = float(s);
  }
  Node n{std::move(Y), {u, v}, nullptr, ""};
  n.backward = [B, k](Tape& t, NodeId self) {
    const Tensor& dY = t.grads_[self];
    const Tensor& U = t.nodes_[t.nodes_[self].parents[0]].value;
    const Tensor& V = t.nodes_[t.nodes_[self].parents[1]].value;
    Tensor& dU = t.ensure_grad(t.nodes_[self].parents[0]);
    Tensor& dV = t.ensure_grad(t.nodes_[self].parents[1]);
    for (int b = 0; b < B; ++b) {
      double g = dY.at(b, 0);
      for (int i = 0; i < k; ++i) {
        double mu = U.at(b, i), su = U.at(b, k + i);
        double mv = V.at(b, i), sv = V.at(b, k + i);
        double su2 = su * su, sv2 = sv * sv;
        bool cu = su2 <= kLogGuard, cv = sv2 <= kLogGuard;
        su2 = std::max(kLogGuard, su2);
        sv2 = std::max(kLogGuard, sv2);
        double dm = mu - mv;
        dU.at(b, i) += float(g * dm / sv2);
        dV.at(b, i) -= float(g * dm / sv2);
        if (!cu) dU.at(b, k + i) += float(g * su * (1.0 / sv2 - 1.0 / su2));
        if (!cv)
          dV.at(b, k + i) +=
              float(g * sv * (1.0 / sv2 - (su2 + dm * dm) / (sv2 * sv2)));
      }
    }
  };
  return push(std::move(n));
}

NodeId Tape::div_ssim(NodeId u, NodeId v) {
  const Tensor& U = nodes_[u].value;
  const Tensor& V = nodes_[v].value;
  check_same_shape(U, V, "div_ssim");
  int B = U.rows(), d = U.cols();
  if (d < 2) fail("ShapeMismatch", "div_ssim: needs at least 2 elements");
  const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  Tensor Y({B, 1});
  for (int b = 0; b < B; ++b) {
    double mu = 0, mv = 0;
    for (int i = 0; i < d; ++i) {
      mu += U.at(b, i);
      mv += V.at(b, i);
    }
    mu /= d;
    mv /= d;
    double vu = 0, vv = 0, cov = 0;
    for (int i = 0; i < d; ++i) {
      double eu = U.at(b, i) - mu, ev = V.at(b, i) - mv;
      vu += eu * eu;
      vv += ev * ev;
      cov += eu * ev;
    }
    vu /= d;
    vv /= d;
    cov /= d;
    double S = ((2 * mu * mv + C1) * (2 * cov + C2)) /
               ((mu * mu + mv * mv + C1) * (vu + vv + C2));
    Y.at(b, 0) = float(1.0 - S);
  }
  Node n{std::move(Y), {u, v}, nullptr, ""};
  n.backward = [B, d, C1, C2](Tape& t, NodeId self) {
    const Tensor& dY = t.grads_[self];
    const Tensor& U = t.nodes_[t.nodes_[self].parents[0]].value;
    const Tensor& V = t.nodes_[t.nodes_[self].parents[1]].value;
    Tensor& dU = t.ensure_grad(t.nodes_[self].parents[0]);
    Tensor& dV = t.ensure_grad(t.nodes_[self].parents[1]);
    for (int b = 0; b < B; ++b) {
      double g = -double(dY.at(b, 0)); // d(1-S) = -dS
      double mu = 0, mv = 0;
      for (int i = 0; i < d; ++i) {
        mu += U.at(b, i);
        mv += V.at(b, i);
      }
      mu /= d;
      mv /= d;
      double vu = 0, vv = 0, cov = 0;
      for (int i = 0; i < d; ++i) {
        double eu = U.at(b, i) - mu, ev = V.at(b, i) - mv;
        vu += eu * eu;
        vv += ev * ev;
        cov += eu * ev;
      }
      vu /= d;
      vv /= d;
      cov /= d;
      double A1 = 2 * mu * mv + C1, A2 = 2 * cov + C2;
      double B1 = mu * mu + mv * mv + C1, B2 = vu + vv + C2;
      double S = (A1 * A2) / (B1 * B2);
      for (int i = 0; i < d; ++i) {
        double eu = U.at(b, i) - mu, ev = V.at(b, i) - mv;
        // dS/du_i assembled from dA1, dA2, dB1, dB2 contributions.
        double dS_u = (2.0 * mv / d) * A2 / (B1 * B2) +
                      (2.0 * ev / d) * A1 / (B1 * B2) -
                      S / B1 * (2.0 * mu / d) - S / B2 * (2.0 * eu / d);
        double dS_v = (2.0 * mu / d) * A2 / (B1 * B2) +
                      (2.0 * eu / d) * A1 / (B1 * B2) -
                      S / B1 * (2.0 * mv / d) - S / B2 * (2.0 * ev / d);
        dU.at(b, i) += float(g * dS_u);
        dV.at(b, i) += float(g * dS_v);
      }
    }
  };
  return push(std::move(n));
}

NodeId Tape::mean_batch(NodeId x) {
  const Tensor& X = nodes_[x].value;
  if (X.cols() != 1) fail("ShapeMismatch", "mean_batch: expects [B,1]");
  int B = X.rows();
  double s = 0.0;
  for (int b = 0; b < B; ++b) s += double(X.at(b, 0));
  Tensor Y({1, 1});
  Y[0] = float(s / B);
  Node n{std::move(Y), {x}, nullptr, ""};
  n.backward = [B](Tape& t, NodeId self) {
    float g = t.grads_[self][0] / float(B);
    Tensor& dX = t.ensure_grad(t.nodes_[self].parents[0]);
    for (int b = 0; b < B; ++b) dX.at(b, 0) += g;
  };
  return push(std::move(n));
}

NodeId Tape::wsum(const std::vector<NodeId>& xs,
                  const std::vector<float>& ws) {
  if (xs.empty() || xs.size() != ws.size())
    fail("ShapeMismatch", "wsum: inputs and weights must align");
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Tensor& X = nodes_[xs[i]].value;
    if (X.size() != 1) fail("ShapeMismatch", "wsum: expects scalars");
    s += double(ws[i]) * double(X[0]);
  }
  Tensor Y({1, 1});
  Y[0] = float(s);
  Node n{std::move(Y), xs, nullptr, ""};
  n.backward = [ws](Tape& t, NodeId self) {
    float g = t.grads_[self][0];
    const auto& ps = t.nodes_[self].parents;
    for (std::size_t i = 0; i < ps.size(); ++i)
      t.ensure_grad(ps[i])[0] += g * ws[i];
  };
  return push(std::move(n));
}

NodeId Tape::entropy_reg(NodeId p) {
  const Tensor& P = nodes_[p].value;
  int B = P.rows(), K = P.cols();
  std::vector<double> pbar(K, 0.0);
  double mean_h = 0.0;
  for (int b = 0; b < B; ++b) {
    double h = 0.0;
    for (int i = 0; i < K; ++i) {
      double pi = std::max(kLogGuard, double(P.at(b, i)));
      h -= pi * std::log(pi);
      pbar[i] += double(P.at(b, i)) / B;
    }
    mean_h += h / B;
  }
  double h_bar = 0.0;
  for (int i = 0; i < K; ++i) {
    double pi = std::max(kLogGuard, pbar[i]);
    h_bar -= pi * std::log(pi);
  }
  Tensor Y({1, 1});
  Y[0] = float(mean_h - h_bar);
  Node n{std::move(Y), {p}, nullptr, ""};
  n.backward = [B, K, pbar](Tape& t, NodeId self) {
    float g = t.grads_[self][0];
    NodeId pi = t.nodes_[self].parents[0];
    const Tensor& P = t.nodes_[pi].value;
    Tensor& dP = t.ensure_grad(pi);
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < K; ++i) {
        double pv = std::max(kLogGuard, double(P.at(b, i)));
        double pb = std::max(kLogGuard, pbar[i]);
        dP.at(b, i) += g * float((std::log(pb) - std::log(pv)) / B);
      }
  };
  return push(std::move(n));
}

void Tape::backward(NodeId loss) {
  if (loss < 0 || loss >= NodeId(nodes_.size()))
    fail("ShapeMismatch", "backward: bad node id");
  if (nodes_[loss].value.size() != 1)
    fail("ShapeMismatch", "backward: loss must be scalar");
  ensure_grad(loss)[0] = 1.0f;
  for (NodeId id = loss; id >= 0; --id) {
    if (grads_[id].empty()) continue;
    if (nodes_[id].backward) nodes_[id].backward(*this, id);
  }
}

} // namespace taskforge
