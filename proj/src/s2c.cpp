#include "srpl/s2c.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace srpl {

void S2CConfig::validate() const {
    if (horizon <= 0) throw std::invalid_argument("s2c.horizon must be positive");
    if (bin_size <= 0 || bin_size > horizon) throw std::invalid_argument("s2c.bin_size must lie in [1, horizon]");
    if (n_bins() < 2) throw std::invalid_argument("s2c needs at least two bins");
    if (buffer_capacity == 0) throw std::invalid_argument("s2c.buffer_capacity must be positive");
    if (target_sync_period <= 0) throw std::invalid_argument("s2c.target_sync_period must be positive");
    if (batch_size <= 0) throw std::invalid_argument("s2c.batch_size must be positive");
    if (updates_per_scenario < 0) throw std::invalid_argument("s2c.updates_per_scenario must be nonnegative");
    for (int h : hidden)
        if (h <= 0) throw std::invalid_argument("s2c.hidden sizes must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("s2c.learning_rate must be positive");
}

std::vector<int> steps_to_cost(std::span<const double> costs, int horizon) {
    constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max() / 2;
    std::vector<int> steps(costs.size());
    std::int64_t next_violation = kNever;
    for (std::size_t i = costs.size(); i-- > 0;) {
        const auto t = static_cast<std::int64_t>(i);
        if (costs[i] > 0.0) {
            steps[i] = 0;
            next_violation = t;
        } else {
            steps[i] = static_cast<int>(std::min<std::int64_t>(next_violation - t, horizon));
        }
    }
    return steps;
}

std::vector<int> label_costs(std::span<const double> costs, const S2CConfig& cfg) {
    std::vector<int> bins = steps_to_cost(costs, cfg.horizon);
    const int cap = cfg.n_bins() - 1;
    for (int& b : bins) b = std::min(b / cfg.bin_size, cap);
    return bins;
}

std::vector<int> label_trajectory(const Trajectory& traj, const S2CConfig& cfg) {
    std::vector<double> costs;
    costs.reserve(traj.steps.size());
    for (const auto& s : traj.steps) costs.push_back(s.cost);
    return label_costs(costs, cfg);
}

SafetyBuffer::SafetyBuffer(std::size_t capacity, int state_dim, int n_bins)
    : capacity_(capacity), dim_(state_dim), n_bins_(n_bins) {
    if (capacity == 0 || state_dim <= 0 || n_bins < 2) throw std::invalid_argument("invalid safety buffer shape");
}

std::size_t SafetyBuffer::slot(std::size_t i) const {
    if (i >= size_) throw std::out_of_range("safety buffer index");
    return (head_ + capacity_ - size_ + i) % capacity_;
}

void SafetyBuffer::add(std::span<const float> state, int bin) {
    if (state.size() != static_cast<std::size_t>(dim_)) throw std::invalid_argument("safety buffer state dimension");
    if (bin < 0 || bin >= n_bins_) throw std::invalid_argument("safety buffer bin out of range");
    const auto d = static_cast<std::size_t>(dim_);
    if (states_.size() < capacity_ * d && head_ * d == states_.size()) {
        states_.insert(states_.end(), state.begin(), state.end());
        bins_.push_back(bin);
    } else {
        std::copy(state.begin(), state.end(), states_.begin() + static_cast<std::ptrdiff_t>(head_ * d));
        bins_[head_] = bin;
    }
    head_ = (head_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
    ++inserted_;
}

std::span<const float> SafetyBuffer::state(std::size_t i) const {
    const auto d = static_cast<std::size_t>(dim_);
    return {states_.data() + slot(i) * d, d};
}

int SafetyBuffer::bin(std::size_t i) const { return bins_[slot(i)]; }

void SafetyBuffer::dump(std::ostream& out) const {
    for (std::size_t i = 0; i < size_; ++i) {
        const auto s = state(i);
        nlohmann::json j = {{"bin", bin(i)}, {"state", std::vector<float>(s.begin(), s.end())}};
        out << j.dump() << '\n';
    }
}

S2CModel::S2CModel(int state_dim, const S2CConfig& cfg, Rng& rng) {
    cfg.validate();
    std::vector<int> sizes{state_dim};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(cfg.n_bins());
    online = DenseNet<float>(sizes, Head::softmax);
    online.initialize(rng, std::sqrt(2.0), 0.01);
    target = online;
    optimizer = Adam<float>(online.param_count(), cfg.learning_rate);
}

std::vector<float> S2CModel::predict(std::span<const float> state) const { return target.forward(state); }

std::vector<float> S2CModel::predict_batch(std::span<const float> states, std::size_t batch) const {
    DenseNet<float>::Cache cache;
    target.forward(states, batch, cache);
    return std::move(cache.output);
}

std::optional<double> s2c_update(S2CModel& model, const SafetyBuffer& buffer, const S2CConfig& cfg, Rng& rng) {
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    if (buffer.size() < batch) return std::nullopt;
    const auto d = static_cast<std::size_t>(buffer.state_dim());
    std::vector<float> states(batch * d);
    std::vector<int> bins(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t i = uniform_index(rng, buffer.size());
        const auto s = buffer.state(i);
        std::copy(s.begin(), s.end(), states.begin() + static_cast<std::ptrdiff_t>(b * d));
        bins[b] = buffer.bin(i);
    }
    std::vector<float> grads;
    const double loss = s2c_loss<float>(model.online, states, bins, &grads);
    model.optimizer.step(model.online.params(), grads);
    ++model.updates;
    if (model.updates % cfg.target_sync_period == 0) model.sync_target();
    return loss;
}

std::vector<float> augment_state(std::span<const float> state, const S2CModel& model) {
    std::vector<float> out(state.begin(), state.end());
    const auto dist = model.predict(state);
    out.insert(out.end(), dist.begin(), dist.end());
    return out;
}

double expected_steps_to_cost(std::span<const float> distribution, const S2CConfig& cfg) {
    double total = 0.0;
    for (std::size_t k = 0; k < distribution.size(); ++k)
        total += static_cast<double>(distribution[k]) * (static_cast<double>(k) * cfg.bin_size + 0.5 * cfg.bin_size);
    return total;
}

}  // namespace srpl
