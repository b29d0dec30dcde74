#pragma once

#include <cstddef>

namespace xdom::kernels {

// Elementwise kernels with scalar/AVX2 pairs (same dispatch as GEMM).
// These are the hot loops of activation layers and optimizer updates.

// y[i] = x[i] > 0 ? x[i] : slope * x[i]
void leaky_relu_forward(size_t n, float slope, const float* x, float* y);
void leaky_relu_forward(size_t n, double slope, const double* x, double* y);

// dx[i] = dy[i] * (x[i] > 0 ? 1 : slope)   (x is the forward input)
void leaky_relu_backward(size_t n, float slope, const float* x, const float* dy, float* dx);
void leaky_relu_backward(size_t n, double slope, const double* x, const double* dy, double* dx);

// y[i] += a * x[i]
void axpy(size_t n, float a, const float* x, float* y);
void axpy(size_t n, double a, const double* x, double* y);

}  // namespace xdom::kernels
