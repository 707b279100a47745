#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "srpl/cmdp.hpp"
#include "srpl/dense_net.hpp"
#include "srpl/rng.hpp"

namespace srpl {

struct S2CConfig {
    int horizon = 60;  // safety horizon in steps
    int bin_size = 2;
    std::size_t buffer_capacity = 200000;
    int target_sync_period = 200;  // online updates between target syncs
    int batch_size = 128;
    int updates_per_scenario = 4;
    std::vector<int> hidden = {64, 64, 32};
    double learning_rate = 1e-3;

    int n_bins() const { return horizon / bin_size; }
    void validate() const;
};

/// Steps until the next positive cost, capped at `horizon`; computed with a
/// single backward scan.
std::vector<int> steps_to_cost(std::span<const double> costs, int horizon);

// Bin index per step: min(steps / bin_size, n_bins - 1).
std::vector<int> label_costs(std::span<const double> costs, const S2CConfig& cfg);
std::vector<int> label_trajectory(const Trajectory& traj, const S2CConfig& cfg);

/// FIFO-evicting store of (state, bin) training pairs.
class SafetyBuffer {
public:
    SafetyBuffer(std::size_t capacity, int state_dim, int n_bins);

    void add(std::span<const float> state, int bin);
    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t inserted() const { return inserted_; }
    int state_dim() const { return dim_; }

    // i indexes from oldest (0) to newest (size() - 1).
    std::span<const float> state(std::size_t i) const;
    int bin(std::size_t i) const;

    // One JSON object per line: {"bin": k, "state": [...]}
    void dump(std::ostream& out) const;

private:
    std::size_t slot(std::size_t i) const;

    std::size_t capacity_;
    int dim_;
    int n_bins_;
    std::vector<float> states_;
    std::vector<int> bins_;
    std::size_t head_ = 0;  // next write slot
    std::size_t size_ = 0;
    std::uint64_t inserted_ = 0;
};

/// Classifier over steps-to-cost bins with a periodically synced target copy.
struct S2CModel {
    DenseNet<float> online;
    DenseNet<float> target;
    Adam<float> optimizer;
    std::int64_t updates = 0;

    S2CModel() = default;
    S2CModel(int state_dim, const S2CConfig& cfg, Rng& rng);

    int state_dim() const { return online.input_dim(); }
    int n_bins() const { return online.output_dim(); }

    // Target-model distribution for one state.
    std::vector<float> predict(std::span<const float> state) const;
    // Target-model distributions for `batch` row-major states.
    std::vector<float> predict_batch(std::span<const float> states, std::size_t batch) const;
    void sync_target() { target = online; }
};

/// Mean negative log-likelihood of the true bins; log-probabilities are
/// clamped at log(1e-12). When `grads` is given it receives the gradient
/// (sized to the network's parameter count, overwritten).
template <typename T>
double s2c_loss(const DenseNet<T>& net, std::span<const T> states, std::span<const int> bins,
                std::vector<T>* grads = nullptr) {
    const std::size_t batch = bins.size();
    if (batch == 0) throw std::invalid_argument("empty S2C batch");
    const auto k = static_cast<std::size_t>(net.output_dim());
    typename DenseNet<T>::Cache cache;
    net.forward(states, batch, cache);
    double loss = 0.0;
    std::vector<T> dz(batch * k);
    for (std::size_t b = 0; b < batch; ++b) {
        const int y = bins[b];
        if (y < 0 || static_cast<std::size_t>(y) >= k) throw std::invalid_argument("S2C label out of range");
        const T* p = cache.output.data() + b * k;
        loss -= std::log(std::max(static_cast<double>(p[y]), 1e-12));
        for (std::size_t j = 0; j < k; ++j)
            dz[b * k + j] = (p[j] - (static_cast<std::size_t>(y) == j ? T(1) : T(0))) / static_cast<T>(batch);
    }
    if (grads != nullptr) {
        grads->assign(net.param_count(), T(0));
        net.backward_preactivation(cache, dz, *grads);
    }
    return loss / static_cast<double>(batch);
}

/// One minibatch step on the online model. Returns nullopt (and leaves the
/// model untouched) when the buffer holds fewer than batch_size pairs.
std::optional<double> s2c_update(S2CModel& model, const SafetyBuffer& buffer, const S2CConfig& cfg, Rng& rng);

/// [state, target distribution]; the prefix is copied verbatim.
std::vector<float> augment_state(std::span<const float> state, const S2CModel& model);

// Expectation of the steps-to-cost value under bin midpoints.
double expected_steps_to_cost(std::span<const float> distribution, const S2CConfig& cfg);

}  // namespace srpl
