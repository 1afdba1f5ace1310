#include "kernels.hpp"

namespace taskforge::kernels {

namespace {
constexpr int kLanes = 16;
}

// Dot product with a fixed lane structure: 16 independent f32 accumulators,
// combined in f64. The order never depends on threading, so results are
// bit-reproducible.
static inline double dot_lanes(const float* __restrict a,
                               const float* __restrict b, int n) {
  float acc[kLanes] = {0};
  int i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (int l = 0; l < kLanes; ++l) acc[l] += a[i + l] * b[i + l];
  double s = 0.0;
  for (int l = 0; l < kLanes; ++l) s += double(acc[l]);
  for (; i < n; ++i) s += double(a[i]) * double(b[i]);
  return s;
}

double dot_f64(const float* a, const float* b, int n) {
  return dot_lanes(a, b, n);
}

void linear_forward(const float* X, const float* W, const float* bias,
                    float* Y, int B, int in, int out) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b) {
    const float* x = X + std::size_t(b) * in;
    float* y = Y + std::size_t(b) * out;
    for (int o = 0; o < out; ++o)
      y[o] = float(dot_lanes(x, W + std::size_t(o) * in, in)) + bias[o];
  }
}

void linear_backward_input(const float* dY, const float* W, float* dX, int B,
                           int in, int out) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b) {
    const float* dy = dY + std::size_t(b) * out;
    float* dx = dX + std::size_t(b) * in;
    for (int o = 0; o < out; ++o) {
      const float g = dy[o];
      if (g == 0.0f) continue;
      const float* w = W + std::size_t(o) * in;
      for (int i = 0; i < in; ++i) dx[i] += g * w[i];
    }
  }
}

void linear_backward_params(const float* dY, const float* X, float* dW,
                            float* db, int B, int in, int out) {
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out; ++o) {
    float* dw = dW + std::size_t(o) * in;
    double dbias = 0.0;
    for (int b = 0; b < B; ++b) {
      const float g = dY[std::size_t(b) * out + o];
      dbias += double(g);
      if (g == 0.0f) continue;
      const float* x = X + std::size_t(b) * in;
      for (int i = 0; i < in; ++i) dw[i] += g * x[i];
    }
    db[o] += float(dbias);
  }
}

} // namespace taskforge::kernels
