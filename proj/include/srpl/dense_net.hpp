#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "srpl/kernels.hpp"
#include "srpl/rng.hpp"

namespace srpl {

enum class Head : std::uint32_t { linear = 0, softmax = 1, gaussian = 2 };

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

/// Fully connected network with tanh hidden units.
///
/// Parameters live in one flat buffer: for every layer the row-major weight
/// matrix (out x in) followed by the bias, then, for gaussian heads, one
/// state-independent log standard deviation per output.
template <typename T>
class DenseNet {
public:
    struct Cache {
        std::size_t batch = 0;
        // activations[0] is the input; activations[l] for 0 < l < L are tanh
        // outputs; activations[L] holds the head pre-activation z.
        std::vector<std::vector<T>> activations;
        std::vector<T> output;
    };

    DenseNet() = default;

    DenseNet(std::vector<int> layer_sizes, Head head) : sizes_(std::move(layer_sizes)), head_(head) {
        if (sizes_.size() < 2) throw std::invalid_argument("network needs at least input and output sizes");
        for (int s : sizes_)
            if (s <= 0) throw std::invalid_argument("layer sizes must be positive");
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            offsets_.push_back(n);
            n += static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
        }
        log_std_offset_ = n;
        if (head_ == Head::gaussian) n += static_cast<std::size_t>(sizes_.back());
        params_.assign(n, T(0));
    }

    const std::vector<int>& layer_sizes() const { return sizes_; }
    Head head() const { return head_; }
    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return sizes_.back(); }
    std::size_t layer_count() const { return sizes_.size() - 1; }
    std::size_t param_count() const { return params_.size(); }
    std::span<T> params() { return params_; }
    std::span<const T> params() const { return params_; }

    std::span<T> weight(std::size_t l) { return {params_.data() + offsets_[l], weight_size(l)}; }
    std::span<const T> weight(std::size_t l) const { return {params_.data() + offsets_[l], weight_size(l)}; }
    std::span<T> bias(std::size_t l) {
        return {params_.data() + offsets_[l] + weight_size(l), static_cast<std::size_t>(sizes_[l + 1])};
    }
    std::span<const T> bias(std::size_t l) const {
        return {params_.data() + offsets_[l] + weight_size(l), static_cast<std::size_t>(sizes_[l + 1])};
    }
    std::span<T> log_std_params() {
        return {params_.data() + log_std_offset_, head_ == Head::gaussian ? static_cast<std::size_t>(sizes_.back()) : 0};
    }
    std::span<const T> log_std_params() const {
        return {params_.data() + log_std_offset_, head_ == Head::gaussian ? static_cast<std::size_t>(sizes_.back()) : 0};
    }
    std::size_t log_std_offset() const { return log_std_offset_; }

    // Clamped to [kLogStdMin, kLogStdMax].
    T log_std(std::size_t k) const {
        return std::clamp(params_[log_std_offset_ + k], T(kLogStdMin), T(kLogStdMax));
    }
    bool log_std_clamped(std::size_t k) const {
        const T v = params_[log_std_offset_ + k];
        return v < T(kLogStdMin) || v > T(kLogStdMax);
    }

    // Orthogonal rows/columns scaled by `hidden_gain`, last layer by
    // `output_gain`; biases zero; log std set to `initial_log_std`.
    void initialize(Rng& rng, double hidden_gain, double output_gain, double initial_log_std = -0.5) {
        for (std::size_t l = 0; l < layer_count(); ++l) {
            const auto rows = static_cast<std::size_t>(sizes_[l + 1]);
            const auto cols = static_cast<std::size_t>(sizes_[l]);
            const double gain = l + 1 == layer_count() ? output_gain : hidden_gain;
            auto w = weight(l);
            orthogonal_fill(rng, w, rows, cols, gain);
            std::fill(bias(l).begin(), bias(l).end(), T(0));
        }
        for (auto& v : log_std_params()) v = static_cast<T>(initial_log_std);
    }

    void forward(std::span<const T> input, std::size_t batch, Cache& cache) const {
        if (batch == 0 || input.size() != batch * static_cast<std::size_t>(input_dim()))
            throw std::invalid_argument("network input dimension mismatch: expected " + std::to_string(input_dim()) +
                                        " per row");
        const std::size_t L = layer_count();
        cache.batch = batch;
        cache.activations.resize(L + 1);
        cache.activations[0].assign(input.begin(), input.end());
        for (std::size_t l = 0; l < L; ++l) {
            const auto in = static_cast<std::size_t>(sizes_[l]);
            const auto out = static_cast<std::size_t>(sizes_[l + 1]);
            auto& next = cache.activations[l + 1];
            next.resize(batch * out);
            kernels::affine_forward<T>(cache.activations[l], weight(l), bias(l), next, batch, in, out);
            if (l + 1 < L)
                for (auto& v : next) v = std::tanh(v);
        }
        apply_head(cache);
    }

    std::vector<T> forward(std::span<const T> input) const {
        Cache cache;
        forward(input, 1, cache);
        return std::move(cache.output);
    }

    // Accumulates parameter gradients given d(loss)/d(head output). For
    // gaussian heads the head output is the mean; log-std gradients are
    // added by the caller through log_std_offset().
    void backward(const Cache& cache, std::span<const T> grad_output, std::span<T> grads,
                  std::vector<T>* grad_input = nullptr) const {
        check_cache(cache, grad_output.size());
        if (head_ != Head::softmax) {
            backward_preactivation(cache, grad_output, grads, grad_input);
            return;
        }
        const auto out = static_cast<std::size_t>(output_dim());
        std::vector<T> dz(grad_output.size());
        for (std::size_t b = 0; b < cache.batch; ++b) {
            const T* p = cache.output.data() + b * out;
            const T* g = grad_output.data() + b * out;
            T inner = 0;
            for (std::size_t k = 0; k < out; ++k) inner += p[k] * g[k];
            for (std::size_t k = 0; k < out; ++k) dz[b * out + k] = p[k] * (g[k] - inner);
        }
        backward_preactivation(cache, dz, grads, grad_input);
    }

    // Same as backward() but starting from d(loss)/dz, the head pre-activation.
    void backward_preactivation(const Cache& cache, std::span<const T> grad_z, std::span<T> grads,
                                std::vector<T>* grad_input = nullptr) const {
        check_cache(cache, grad_z.size());
        if (grads.size() != params_.size()) throw std::invalid_argument("gradient buffer size mismatch");
        const std::size_t L = layer_count();
        const std::size_t batch = cache.batch;
        std::vector<T> delta(grad_z.begin(), grad_z.end());
        std::vector<T> prev;
        for (std::size_t l = L; l-- > 0;) {
            const auto in = static_cast<std::size_t>(sizes_[l]);
            const auto out = static_cast<std::size_t>(sizes_[l + 1]);
            std::span<T> dw{grads.data() + offsets_[l], weight_size(l)};
            std::span<T> db{grads.data() + offsets_[l] + weight_size(l), out};
            kernels::affine_backward_params<T>(delta, cache.activations[l], dw, db, batch, in, out);
            if (l == 0 && grad_input == nullptr) break;
            prev.resize(batch * in);
            kernels::affine_backward_input<T>(delta, weight(l), prev, batch, in, out);
            if (l > 0) {
                const auto& a = cache.activations[l];
                for (std::size_t i = 0; i < prev.size(); ++i) prev[i] *= T(1) - a[i] * a[i];
            }
            delta.swap(prev);
        }
        if (grad_input != nullptr) *grad_input = std::move(delta);
    }

    template <typename U>
    DenseNet<U> cast() const {
        DenseNet<U> other(sizes_, head_);
        auto dst = other.params();
        for (std::size_t i = 0; i < params_.size(); ++i) dst[i] = static_cast<U>(params_[i]);
        return other;
    }

    friend bool operator==(const DenseNet& a, const DenseNet& b) {
        return a.sizes_ == b.sizes_ && a.head_ == b.head_ && a.params_ == b.params_;
    }

private:
    std::size_t weight_size(std::size_t l) const {
        return static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1]);
    }

    void check_cache(const Cache& cache, std::size_t grad_size) const {
        if (cache.batch == 0 || cache.activations.size() != layer_count() + 1)
            throw std::logic_error("backward called without a forward cache");
        if (grad_size != cache.batch * static_cast<std::size_t>(output_dim()))
            throw std::invalid_argument("upstream gradient dimension mismatch");
    }

    void apply_head(Cache& cache) const {
        const auto& z = cache.activations.back();
        cache.output = z;
        if (head_ != Head::softmax) return;
        const auto out = static_cast<std::size_t>(output_dim());
        for (std::size_t b = 0; b < cache.batch; ++b) {
            T* p = cache.output.data() + b * out;
            const T m = *std::max_element(p, p + out);
            T sum = 0;
            for (std::size_t k = 0; k < out; ++k) {
                p[k] = std::exp(p[k] - m);
                sum += p[k];
            }
            for (std::size_t k = 0; k < out; ++k) p[k] /= sum;
        }
    }

    static void orthogonal_fill(Rng& rng, std::span<T> w, std::size_t rows, std::size_t cols, double gain) {
        // Orthonormalize along the shorter dimension with modified Gram-Schmidt.
        const bool by_rows = rows <= cols;
        const std::size_t count = by_rows ? rows : cols;
        const std::size_t len = by_rows ? cols : rows;
        std::vector<double> m(count * len);
        for (auto& v : m) v = standard_normal(rng);
        for (std::size_t a = 0; a < count; ++a) {
            double* va = m.data() + a * len;
            for (std::size_t b = 0; b < a; ++b) {
                const double* vb = m.data() + b * len;
                double d = 0.0;
                for (std::size_t k = 0; k < len; ++k) d += va[k] * vb[k];
                for (std::size_t k = 0; k < len; ++k) va[k] -= d * vb[k];
            }
            double nrm = 0.0;
            for (std::size_t k = 0; k < len; ++k) nrm += va[k] * va[k];
            nrm = std::sqrt(nrm);
            for (std::size_t k = 0; k < len; ++k) va[k] = nrm > 0.0 ? va[k] / nrm : 0.0;
        }
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                const double v = by_rows ? m[r * len + c] : m[c * len + r];
                w[r * cols + c] = static_cast<T>(gain * v);
            }
    }

    std::vector<int> sizes_;
    Head head_ = Head::linear;
    std::vector<std::size_t> offsets_;
    std::size_t log_std_offset_ = 0;
    std::vector<T> params_;
};

// Log density of a diagonal gaussian at x.
template <typename T>
T gaussian_log_density(std::span<const T> mean, std::span<const T> log_std, std::span<const T> x) {
    constexpr double kHalfLog2Pi = 0.91893853320467274178;
    T total = 0;
    for (std::size_t k = 0; k < mean.size(); ++k) {
        const T z = (x[k] - mean[k]) / std::exp(log_std[k]);
        total += T(-0.5) * z * z - log_std[k] - T(kHalfLog2Pi);
    }
    return total;
}

/// Adaptive-moment optimizer state for one flat parameter buffer.
template <typename T>
struct Adam {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step_count = 0;
    std::vector<T> m;
    std::vector<T> v;

    Adam() = default;
    Adam(std::size_t n, double learning_rate) : lr(learning_rate), m(n, T(0)), v(n, T(0)) {}

    void step(std::span<T> params, std::span<const T> grads) {
        if (params.size() != m.size() || grads.size() != m.size())
            throw std::invalid_argument("optimizer state shape mismatch");
        ++step_count;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        const T step_size = static_cast<T>(lr / c1);
        const T b1 = static_cast<T>(beta1);
        const T b2 = static_cast<T>(beta2);
        const T inv_c2 = static_cast<T>(1.0 / c2);
        const T e = static_cast<T>(eps);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = b1 * m[i] + (T(1) - b1) * grads[i];
            v[i] = b2 * v[i] + (T(1) - b2) * grads[i] * grads[i];
            params[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_c2) + e);
        }
    }
};

// Rescales grads in place so their L2 norm is at most max_norm; returns the
// original norm.
template <typename T>
double clip_grad_norm(std::span<T> grads, double max_norm) {
    double sq = 0.0;
    for (T g : grads) sq += static_cast<double>(g) * static_cast<double>(g);
    const double nrm = std::sqrt(sq);
    if (nrm > max_norm && nrm > 0.0) {
        const T scale = static_cast<T>(max_norm / nrm);
        for (auto& g : grads) g *= scale;
    }
    return nrm;
}

}  // namespace srpl
