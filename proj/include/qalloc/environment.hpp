/**
 * @file environment.hpp
 * @brief Episodic market process: states, weight actions, rewards, portfolio value.
 *
 * A state at row t concatenates three segments:
 *   [0, N)         preprocessed (scaled, detrended) prices at t
 *   [N, 2N)        trailing `window`-day moving averages of the same series
 *   [2N, 2N + N^2) row-major trailing correlation matrix of raw prices
 *
 * Acting at t earns the raw-price move t -> t+1. There are no trading costs:
 * value evolves only through (1 + portfolio return).
 */

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qalloc/config.hpp"
#include "qalloc/errors.hpp"
#include "qalloc/market_data.hpp"
#include "qalloc/weights.hpp"

namespace qalloc
{
    struct State
    {
        std::size_t t = 0;
        Eigen::VectorXd features;

        bool operator==(const State &o) const
        {
            return t == o.t && features.size() == o.features.size() && (features.array() == o.features.array()).all();
        }
    };

    inline constexpr std::size_t state_length(std::size_t num_assets) { return num_assets * (num_assets + 2); }

    /// Inverse of state_length(): N with N(N+2) == length. Throws if no such N exists.
    inline std::size_t assets_in_state(std::size_t length)
    {
        auto n = static_cast<std::size_t>(std::sqrt(static_cast<double>(length) + 1.0)) - 1;
        while (state_length(n + 1) <= length)
            ++n;
        if (state_length(n) != length || n == 0)
            throw std::invalid_argument("state length " + std::to_string(length) + " is not N(N+2)");
        return n;
    }

    struct RewardVector
    {
        Eigen::VectorXd per_asset;
        double portfolio = 0.0;
    };

    struct StepRecord
    {
        std::size_t t = 0;
        Date date;
        Eigen::VectorXd weights;
        double portfolio_return = 0.0;
        double portfolio_value = 0.0; ///< value after applying this step's return
    };

    struct EpisodeLog
    {
        std::vector<std::string> assets;
        double initial_value = 1.0;
        std::vector<StepRecord> steps;

        double final_value() const { return steps.empty() ? initial_value : steps.back().portfolio_value; }

        std::vector<double> portfolio_returns() const
        {
            std::vector<double> r;
            r.reserve(steps.size());
            for (const auto &s : steps)
                r.push_back(s.portfolio_return);
            return r;
        }

        /// `step,date,portfolio_return,portfolio_value,<asset...>` with round-trip precision.
        void write_csv(std::ostream &out) const
        {
            out << "step,date,portfolio_return,portfolio_value";
            for (const auto &a : assets)
                out << ',' << a;
            out << '\n';
            out << std::setprecision(std::numeric_limits<double>::max_digits10);
            for (std::size_t k = 0; k < steps.size(); ++k)
            {
                const auto &s = steps[k];
                out << k << ',' << format_date(s.date) << ',' << s.portfolio_return << ',' << s.portfolio_value;
                for (Eigen::Index i = 0; i < s.weights.size(); ++i)
                    out << ',' << s.weights[i];
                out << '\n';
            }
        }
    };

    /// Parses the CSV written by EpisodeLog::write_csv(). initial_value must be supplied.
    inline EpisodeLog read_episode_csv(std::istream &in, double initial_value)
    {
        EpisodeLog log;
        log.initial_value = initial_value;
        std::string line;
        if (!std::getline(in, line))
            throw DataError("episode CSV is empty");
        auto header = detail::split_csv_line(line);
        if (header.size() < 4 || header[0] != "step" || header[1] != "date" || header[2] != "portfolio_return" ||
            header[3] != "portfolio_value")
            throw DataError("episode CSV has an unexpected header");
        for (std::size_t i = 4; i < header.size(); ++i)
            log.assets.emplace_back(header[i]);

        while (std::getline(in, line))
        {
            if (detail::trim(line).empty())
                continue;
            auto cells = detail::split_csv_line(line);
            if (cells.size() != header.size())
                throw DataError("episode CSV row has " + std::to_string(cells.size()) + " cells");
            StepRecord rec;
            rec.t = log.steps.size();
            auto d = parse_date(cells[1]);
            if (!d)
                throw DataError("episode CSV: bad date");
            rec.date = *d;
            rec.portfolio_return = detail::parse_price(cells[2]);
            rec.portfolio_value = detail::parse_price(cells[3]);
            rec.weights.resize(static_cast<Eigen::Index>(log.assets.size()));
            for (std::size_t i = 0; i < log.assets.size(); ++i)
                rec.weights[static_cast<Eigen::Index>(i)] = detail::parse_price(cells[4 + i]);
            log.steps.push_back(std::move(rec));
        }
        return log;
    }

    /// Raw prices plus the two preprocessed series that feed state segments A and B.
    struct MarketFeatures
    {
        PriceTable prices;
        Eigen::MatrixXd level;      ///< segment A source
        Eigen::MatrixXd ma_series;  ///< series averaged into segment B
    };

    /**
     * @brief Preprocesses @p table with a trend model fitted elsewhere (normally the
     *        training range). Row r of @p table sits at trend time origin_offset + r.
     */
    inline MarketFeatures make_features(const PriceTable &table, const TrendModel &trend, std::ptrdiff_t origin_offset,
                                        MovingAverageSource ma_source)
    {
        MarketFeatures f;
        f.prices = table;
        f.level = trend.detrended(table.prices, origin_offset);
        f.ma_series = ma_source == MovingAverageSource::Detrended ? f.level : trend.scaled(table.prices);
        return f;
    }

    /// Fits the trend on @p table itself and preprocesses it.
    inline MarketFeatures make_features(const PriceTable &table, const Config &config)
    {
        return make_features(table, TrendModel::fit(table, config.scale_by_first_price), 0, config.ma_source);
    }

    class Environment
    {
    public:
        struct StepResult
        {
            State next;
            RewardVector reward;
            bool done = false;
        };

        Environment(MarketFeatures features, std::size_t window, Regime regime, double initial_investment)
            : features_(std::move(features)), window_(window), regime_(regime), initial_(initial_investment)
        {
            if (window_ < 2)
                throw std::invalid_argument("Environment: window must be >= 2");
            const auto rows = features_.prices.num_rows();
            if (rows < window_ + 1)
                throw InsufficientHistory(rows, window_ + 1);
            if (!(initial_ > 0.0))
                throw std::invalid_argument("Environment: initial investment must be positive");

            states_.reserve(rows - (window_ - 1));
            for (std::size_t t = window_ - 1; t < rows; ++t)
                states_.push_back(build_state(t));
            reset();
        }

        std::size_t num_assets() const { return features_.prices.num_assets(); }
        std::size_t num_rows() const { return features_.prices.num_rows(); }
        std::size_t window() const { return window_; }
        std::size_t first_index() const { return window_ - 1; }
        std::size_t last_index() const { return num_rows() - 1; }
        std::size_t state_size() const { return state_length(num_assets()); }
        std::size_t steps_per_episode() const { return last_index() - first_index(); }
        Regime regime() const { return regime_; }
        std::size_t cursor() const { return t_; }
        double portfolio_value() const { return value_; }
        const MarketFeatures &features() const { return features_; }
        const PriceTable &prices() const { return features_.prices; }
        const EpisodeLog &log() const { return log_; }

        State reset()
        {
            t_ = first_index();
            value_ = initial_;
            log_ = EpisodeLog{features_.prices.assets, initial_, {}};
            log_.steps.reserve(steps_per_episode());
            return get_state(t_);
        }

        const State &get_state(std::size_t t) const
        {
            if (t < first_index() || t > last_index())
                throw std::out_of_range("get_state: index " + std::to_string(t) + " outside [" +
                                        std::to_string(first_index()) + ", " + std::to_string(last_index()) + "]");
            return states_[t - first_index()];
        }

        const State &current_state() const { return get_state(t_); }

        RewardVector get_reward(const WeightVector &action, std::size_t t) const
        {
            if (t < first_index() || t >= last_index())
                throw std::out_of_range("get_reward: index " + std::to_string(t) + " has no next-day price");
            check_action(action);
            const auto &p = features_.prices.prices;
            const auto row = static_cast<Eigen::Index>(t);
            RewardVector r;
            r.per_asset = (p.row(row + 1).array() / p.row(row).array() - 1.0).matrix().transpose();
            r.portfolio = action.weights.dot(r.per_asset);
            return r;
        }

        StepResult step(const WeightVector &action)
        {
            if (t_ >= last_index())
                throw std::logic_error("step: episode already finished; call reset()");
            RewardVector reward = get_reward(action, t_);
            value_ *= 1.0 + reward.portfolio;
            log_.steps.push_back({t_, features_.prices.dates[t_], action.weights, reward.portfolio, value_});
            ++t_;
            return {get_state(t_), std::move(reward), t_ == last_index()};
        }

        void check_action(const WeightVector &action) const
        {
            if (static_cast<std::size_t>(action.weights.size()) != num_assets())
                throw InvalidAction("action has " + std::to_string(action.weights.size()) + " weights, expected " +
                                    std::to_string(num_assets()));
            if (action.regime != regime_)
                throw InvalidAction("action regime " + std::string(to_string(action.regime)) +
                                    " does not match environment regime " + std::string(to_string(regime_)));
            if (auto why = weight_violation(action); !why.empty())
                throw InvalidAction(why);
        }

    private:
        State build_state(std::size_t t) const
        {
            const auto n = static_cast<Eigen::Index>(num_assets());
            State s;
            s.t = t;
            s.features.resize(n * (n + 2));
            const auto row = static_cast<Eigen::Index>(t);
            s.features.head(n) = features_.level.row(row).transpose();
            const auto rows = static_cast<std::size_t>(features_.ma_series.rows());
            for (Eigen::Index a = 0; a < n; ++a)
                s.features[n + a] = moving_average(
                    std::span<const double>(features_.ma_series.col(a).data(), rows), window_, t);
            // row-major flattening
            const Eigen::MatrixXd corr = rolling_correlation(features_.prices, t, window_).transpose();
            s.features.segment(2 * n, n * n) = Eigen::Map<const Eigen::VectorXd>(corr.data(), n * n);
            return s;
        }

        MarketFeatures features_;
        std::size_t window_;
        Regime regime_;
        double initial_;
        std::vector<State> states_;
        std::size_t t_ = 0;
        double value_ = 0.0;
        EpisodeLog log_;
    };

} // namespace qalloc
