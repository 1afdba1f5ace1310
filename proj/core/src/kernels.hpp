#pragma once

// Internal dense-math kernels shared by the tape ops and the raw (gradient-
// free) evaluation path. Summation orders are fixed so results are identical
// run to run at any thread count: parallel loops only ever split disjoint
// output rows, never a reduction.

#include <cstddef>

namespace taskforge::kernels {

// Y[b,:] = X[b,:] * W^T + bias, W stored row-major [out, in].
void linear_forward(const float* X, const float* W, const float* bias,
                    float* Y, int B, int in, int out);

// dX[b,:] += dY[b,:] * W
void linear_backward_input(const float* dY, const float* W, float* dX, int B,
                           int in, int out);

// dW[o,:] += sum_b dY[b,o] * X[b,:];  db[o] += sum_b dY[b,o]
void linear_backward_params(const float* dY, const float* X, float* dW,
                            float* db, int B, int in, int out);

// Row dot product with float64 lane combine; used by small reducers.
double dot_f64(const float* a, const float* b, int n);

} // namespace taskforge::kernels
