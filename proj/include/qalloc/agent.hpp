#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <cstddef>
#include <deque>
#include <optional>
#include <stdexcept>

#include "qalloc/environment.hpp"
#include "qalloc/qnet.hpp"
#include "qalloc/rng.hpp"
#include "qalloc/weights.hpp"

namespace qalloc
{
    /// Anything that maps a state vector to one Q-value per asset.
    template <class F>
    concept QFunction = requires(const F &f, const Eigen::VectorXd &x) {
        { f.forward(x) } -> std::convertible_to<Eigen::VectorXd>;
    };

    /// raw / sum(raw); raw must be non-negative with a positive sum.
    inline WeightVector normalize_long(const Eigen::VectorXd &raw)
    {
        return {raw / raw.sum(), Regime::LongOnly};
    }

    /// raw / sum|raw|; keeps signs, gross exposure one.
    inline WeightVector normalize_long_short(const Eigen::VectorXd &raw)
    {
        return {raw / raw.cwiseAbs().sum(), Regime::LongShort};
    }

    inline WeightVector explore_long(std::size_t n, Rng &rng)
    {
        Eigen::VectorXd raw(static_cast<Eigen::Index>(n));
        do
        {
            for (Eigen::Index i = 0; i < raw.size(); ++i)
                raw[i] = rng.uniform01();
        } while (!(raw.sum() > 0.0));
        return normalize_long(raw);
    }

    inline WeightVector explore_long_short(std::size_t n, Rng &rng)
    {
        Eigen::VectorXd raw(static_cast<Eigen::Index>(n));
        do
        {
            for (Eigen::Index i = 0; i < raw.size(); ++i)
                raw[i] = rng.uniform(-1.0, 1.0);
        } while (!(raw.cwiseAbs().sum() > 0.0));
        return normalize_long_short(raw);
    }

    inline WeightVector explore(std::size_t n, Regime regime, Rng &rng)
    {
        return regime == Regime::LongOnly ? explore_long(n, rng) : explore_long_short(n, rng);
    }

    /**
     * @brief Maps Q-values to weights: softmax under LongOnly, sign-preserving L1
     *        normalization under LongShort (equal weights if every q is zero).
     */
    inline WeightVector weights_from_q(const Eigen::VectorXd &q, Regime regime)
    {
        if (q.size() == 0 || !q.allFinite())
            throw NumericError("exploit: non-finite Q-values");
        if (regime == Regime::LongOnly)
        {
            const Eigen::ArrayXd e = (q.array() - q.maxCoeff()).exp();
            return {(e / e.sum()).matrix(), Regime::LongOnly};
        }
        const double gross = q.cwiseAbs().sum();
        if (gross == 0.0)
            return {Eigen::VectorXd::Constant(q.size(), 1.0 / static_cast<double>(q.size())), Regime::LongShort};
        return {q / gross, Regime::LongShort};
    }

    template <QFunction Net>
    WeightVector exploit(const Net &net, const State &state, Regime regime)
    {
        return weights_from_q(net.forward(state.features), regime);
    }

    struct Decision
    {
        WeightVector weights;
        bool explored = false;
    };

    /// Epsilon-greedy choice. The explore/exploit coin consumes exactly one RNG value.
    template <QFunction Net>
    Decision act(const Net &net, const State &state, double epsilon, Rng &rng, Regime regime)
    {
        if (!(epsilon >= 0.0 && epsilon <= 1.0))
            throw std::invalid_argument("act: epsilon must be in [0, 1]");
        if (rng.bernoulli(epsilon))
            return {explore(assets_in_state(static_cast<std::size_t>(state.features.size())), regime, rng), true};
        return {exploit(net, state, regime), false};
    }

    struct Experience
    {
        State prev_state;
        WeightVector action;
        State next_state;
        RewardVector reward;
    };

    /// Fixed-capacity FIFO of experiences; pushing into a full buffer evicts the oldest.
    class ReplayBuffer
    {
    public:
        explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity)
        {
            if (capacity_ == 0)
                throw std::invalid_argument("ReplayBuffer: capacity must be positive");
        }

        void push(Experience exp)
        {
            if (exp.next_state.t != exp.prev_state.t + 1)
                throw std::invalid_argument("ReplayBuffer: next_state must follow prev_state by one step");
            if (entries_.size() == capacity_)
                entries_.pop_front();
            entries_.push_back(std::move(exp));
        }

        std::size_t capacity() const { return capacity_; }
        std::size_t size() const { return entries_.size(); }
        bool full() const { return entries_.size() == capacity_; }
        bool empty() const { return entries_.empty(); }
        const Experience &operator[](std::size_t i) const { return entries_[i]; }
        auto begin() const { return entries_.begin(); }
        auto end() const { return entries_.end(); }
        void clear() { entries_.clear(); }

    private:
        std::size_t capacity_;
        std::deque<Experience> entries_;
    };

    inline void remember(ReplayBuffer &buffer, Experience exp) { buffer.push(std::move(exp)); }

    /// States and targets r + gamma * max_j Q(next)_j for every buffered experience, oldest first.
    template <QFunction Net>
    TrainBatch make_batch(const ReplayBuffer &buffer, const Net &net, double gamma)
    {
        if (buffer.empty())
            throw std::invalid_argument("make_batch: empty buffer");
        const auto rows = static_cast<Eigen::Index>(buffer.size());
        const auto dim = buffer[0].prev_state.features.size();
        const auto heads = buffer[0].reward.per_asset.size();
        TrainBatch batch{Eigen::MatrixXd(rows, dim), Eigen::MatrixXd(rows, heads)};
        for (Eigen::Index b = 0; b < rows; ++b)
        {
            const auto &e = buffer[static_cast<std::size_t>(b)];
            batch.states.row(b) = e.prev_state.features.transpose();
            batch.targets.row(b) = e.reward.per_asset.transpose();
            if (gamma != 0.0)
                batch.targets.row(b).array() += gamma * net.forward(e.next_state.features).maxCoeff();
        }
        return batch;
    }

    /**
     * @brief Trains @p net on the whole buffer once it is full.
     *
     * Returns the pre-step loss, or nullopt (no update) while the buffer is still filling.
     */
    inline std::optional<double> exp_replay(const ReplayBuffer &buffer, QNetwork &net, double learning_rate,
                                            double gamma)
    {
        if (!buffer.full())
            return std::nullopt;
        return net.train_batch(make_batch(buffer, net, gamma), learning_rate);
    }

    /// epsilon_k = max(floor, start * decay^k)
    struct EpsilonSchedule
    {
        double start = 1.0;
        double decay = 0.995;
        double floor = 0.01;

        double at(std::size_t episode) const
        {
            return std::max(floor, start * std::pow(decay, static_cast<double>(episode)));
        }
    };

} // namespace qalloc
