#include <cstddef>

#include "kernels_internal.hpp"

namespace xdom::kernels::detail {

template <class T>
void leaky_relu_forward_scalar(size_t n, T slope, const T* x, T* y) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
}

template <class T>
void leaky_relu_backward_scalar(size_t n, T slope, const T* x, const T* dy, T* dx) {
  for (size_t i = 0; i < n; ++i) dx[i] = x[i] > T(0) ? dy[i] : slope * dy[i];
}

template <class T>
void axpy_scalar(size_t n, T a, const T* x, T* y) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template void leaky_relu_forward_scalar<float>(size_t, float, const float*, float*);
template void leaky_relu_forward_scalar<double>(size_t, double, const double*, double*);
template void leaky_relu_backward_scalar<float>(size_t, float, const float*, const float*,
                                                float*);
template void leaky_relu_backward_scalar<double>(size_t, double, const double*, const double*,
                                                 double*);
template void axpy_scalar<float>(size_t, float, const float*, float*);
template void axpy_scalar<double>(size_t, double, const double*, double*);

}  // namespace xdom::kernels::detail
