#pragma once

// Batched affine-layer kernels. Every function has a serial reference
// (`*_serial`) and a parallel version. The parallel versions split work over
// independent output rows and keep the per-element accumulation order of the
// reference, so both produce bit-identical results for any thread count.

#include <cstddef>
#include <span>

#ifdef SRPL_HAVE_OPENMP
#include <omp.h>
#endif

namespace srpl::kernels {

// Fixed-order dot product with eight partial sums (vectorizable without
// reassociation flags).
template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
    T acc[8] = {};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (std::size_t k = 0; k < 8; ++k) acc[k] += a[i + k] * b[i + k];
    T tail = 0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <typename T>
inline void axpy(T alpha, const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// y[b, o] = bias[o] + sum_i x[b, i] * w[o, i]
template <typename T>
inline void affine_row(const T* x, const T* w, const T* bias, T* y, std::size_t in, std::size_t out) {
    for (std::size_t o = 0; o < out; ++o) y[o] = bias[o] + dot(x, w + o * in, in);
}

template <typename T>
void affine_forward_serial(std::span<const T> x, std::span<const T> w, std::span<const T> bias, std::span<T> y,
                           std::size_t batch, std::size_t in, std::size_t out) {
    for (std::size_t b = 0; b < batch; ++b) affine_row(x.data() + b * in, w.data(), bias.data(), y.data() + b * out, in, out);
}

template <typename T>
void affine_forward(std::span<const T> x, std::span<const T> w, std::span<const T> bias, std::span<T> y,
                    std::size_t batch, std::size_t in, std::size_t out) {
    const auto n = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel for schedule(static) if (batch * in * out > 32768)
    for (std::ptrdiff_t b = 0; b < n; ++b)
        affine_row(x.data() + b * in, w.data(), bias.data(), y.data() + b * out, in, out);
}

// dx[b, i] = sum_o dy[b, o] * w[o, i]   (overwrites dx)
template <typename T>
inline void input_grad_row(const T* dy, const T* w, T* dx, std::size_t in, std::size_t out) {
    for (std::size_t i = 0; i < in; ++i) dx[i] = 0;
    for (std::size_t o = 0; o < out; ++o) axpy(dy[o], w + o * in, dx, in);
}

template <typename T>
void affine_backward_input_serial(std::span<const T> dy, std::span<const T> w, std::span<T> dx, std::size_t batch,
                                  std::size_t in, std::size_t out) {
    for (std::size_t b = 0; b < batch; ++b) input_grad_row(dy.data() + b * out, w.data(), dx.data() + b * in, in, out);
}

template <typename T>
void affine_backward_input(std::span<const T> dy, std::span<const T> w, std::span<T> dx, std::size_t batch,
                           std::size_t in, std::size_t out) {
    const auto n = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel for schedule(static) if (batch * in * out > 32768)
    for (std::ptrdiff_t b = 0; b < n; ++b) input_grad_row(dy.data() + b * out, w.data(), dx.data() + b * in, in, out);
}

// dw[o, i] += sum_b dy[b, o] * x[b, i];  dbias[o] += sum_b dy[b, o]
template <typename T>
inline void param_grad_row(std::span<const T> dy, std::span<const T> x, T* dw_row, T& dbias, std::size_t o,
                           std::size_t batch, std::size_t in, std::size_t out) {
    for (std::size_t b = 0; b < batch; ++b) {
        const T g = dy[b * out + o];
        if (g == T(0)) continue;
        axpy(g, x.data() + b * in, dw_row, in);
        dbias += g;
    }
}

template <typename T>
void affine_backward_params_serial(std::span<const T> dy, std::span<const T> x, std::span<T> dw, std::span<T> dbias,
                                   std::size_t batch, std::size_t in, std::size_t out) {
    for (std::size_t o = 0; o < out; ++o) param_grad_row(dy, x, dw.data() + o * in, dbias[o], o, batch, in, out);
}

template <typename T>
void affine_backward_params(std::span<const T> dy, std::span<const T> x, std::span<T> dw, std::span<T> dbias,
                            std::size_t batch, std::size_t in, std::size_t out) {
    const auto n = static_cast<std::ptrdiff_t>(out);
#pragma omp parallel for schedule(static) if (batch * in * out > 32768)
    for (std::ptrdiff_t o = 0; o < n; ++o) param_grad_row(dy, x, dw.data() + o * in, dbias[o], o, batch, in, out);
}

inline int max_workers() {
#ifdef SRPL_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_workers(int n) {
#ifdef SRPL_HAVE_OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

}  // namespace srpl::kernels
