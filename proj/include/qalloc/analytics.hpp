/**
 * @file analytics.hpp
 * @brief Baseline allocators and the performance metric suite.
 *
 * All functions are pure. Annualization uses 252 trading days per year.
 */

#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "qalloc/errors.hpp"
#include "qalloc/market_data.hpp"
#include "qalloc/weights.hpp"

namespace qalloc
{
    inline constexpr double kTradingDaysPerYear = 252.0;

    struct MetricsReport
    {
        double mean_daily_return = 0.0;
        double volatility_daily = 0.0;
        double volatility_annualized = 0.0;
        double sharpe_annualized = 0.0;
        std::optional<double> alpha_daily; ///< empty when the benchmark has zero variance
        std::optional<double> beta;
        double final_value = 0.0;
        std::size_t num_days = 0;
    };

    /// Sample covariance (divisor n - 1) of the columns of @p returns.
    inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd &returns)
    {
        if (returns.rows() < 2)
            throw std::invalid_argument("sample_covariance: need at least two observations");
        const Eigen::MatrixXd centered = returns.rowwise() - returns.colwise().mean();
        return (centered.transpose() * centered) / static_cast<double>(returns.rows() - 1);
    }

    inline double portfolio_variance(const Eigen::VectorXd &w, const Eigen::MatrixXd &cov) { return w.dot(cov * w); }

    /**
     * @brief Unconstrained-sign minimum-variance weights (cov + ridge I)^-1 1, normalized to sum 1.
     *
     * Throws NumericError, quoting the reciprocal condition estimate, when the
     * regularized covariance cannot be solved reliably.
     */
    inline WeightVector min_variance_weights(const Eigen::MatrixXd &cov, double ridge)
    {
        if (cov.rows() != cov.cols() || cov.rows() == 0)
            throw std::invalid_argument("min_variance_weights: covariance must be square and non-empty");
        const auto n = cov.rows();
        const Eigen::MatrixXd reg = cov + ridge * Eigen::MatrixXd::Identity(n, n);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
        double rcond = 0.0;
        if (ldlt.info() == Eigen::Success)
        {
            const Eigen::VectorXd d = ldlt.vectorD();
            const double pivot_ratio = d.minCoeff() > 0.0 ? d.minCoeff() / d.maxCoeff() : 0.0;
            rcond = std::min(ldlt.rcond(), pivot_ratio);
        }
        if (!(rcond > 1e-15))
        {
            std::ostringstream msg;
            msg << "min_variance_weights: singular covariance (reciprocal condition " << rcond << ", ridge " << ridge
                << ")";
            throw NumericError(msg.str());
        }
        const Eigen::VectorXd x = ldlt.solve(Eigen::VectorXd::Ones(n));
        const double denom = x.sum();
        if (!std::isfinite(denom) || denom == 0.0 || !x.allFinite())
            throw NumericError("min_variance_weights: degenerate normalization (1' S^-1 1 = " + std::to_string(denom) +
                               ")");
        return {x / denom, Regime::Budget};
    }

    inline WeightVector min_variance_weights(const ReturnTable &returns, double ridge)
    {
        if (returns.num_rows() < returns.num_assets() + 2)
            throw InsufficientHistory(returns.num_rows(), returns.num_assets() + 2);
        return min_variance_weights(sample_covariance(returns.returns), ridge);
    }

    /// All weight on the highest mean daily return; ties go to the lowest index.
    inline WeightVector max_return_weights(const ReturnTable &returns)
    {
        if (returns.num_rows() < 2)
            throw InsufficientHistory(returns.num_rows(), 2);
        const Eigen::RowVectorXd means = returns.returns.colwise().mean();
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < means.size(); ++i)
            if (means[i] > means[best])
                best = i;
        Eigen::VectorXd w = Eigen::VectorXd::Zero(means.size());
        w[best] = 1.0;
        return {w, Regime::LongOnly};
    }

    inline WeightVector equal_weights(std::size_t n)
    {
        if (n == 0)
            throw std::invalid_argument("equal_weights: n must be positive");
        return {Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)),
                Regime::LongOnly};
    }

    /// v_0 = initial, v_{k+1} = v_k (1 + r_k). Returns n + 1 values.
    inline std::vector<double> equity_curve(std::span<const double> returns, double initial)
    {
        std::vector<double> curve;
        curve.reserve(returns.size() + 1);
        curve.push_back(initial);
        for (std::size_t k = 0; k < returns.size(); ++k)
        {
            if (!(returns[k] > -1.0))
                throw DataError("equity_curve: return " + std::to_string(returns[k]) + " at step " +
                                std::to_string(k) + " is <= -100%");
            curve.push_back(curve.back() * (1.0 + returns[k]));
        }
        return curve;
    }

    namespace detail
    {
        inline double mean(std::span<const double> x)
        {
            double s = 0.0;
            for (double v : x)
                s += v;
            return s / static_cast<double>(x.size());
        }

        /// Sample covariance with divisor n - 1.
        inline double covariance(std::span<const double> x, std::span<const double> y)
        {
            const double mx = mean(x);
            const double my = mean(y);
            double s = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i)
                s += (x[i] - mx) * (y[i] - my);
            return s / static_cast<double>(x.size() - 1);
        }
    } // namespace detail

    /**
     * @brief Mean, volatility, Sharpe, alpha and beta of a daily portfolio return series.
     *
     * Volatility is the sample standard deviation. Sharpe is reported as 0 when
     * volatility is exactly 0. Alpha and beta are left empty when the benchmark
     * does not vary.
     */
    inline MetricsReport compute_metrics(std::span<const double> portfolio, std::span<const double> benchmark,
                                         double risk_free_rate, double initial_investment = 1.0)
    {
        if (portfolio.size() != benchmark.size())
            throw std::invalid_argument("compute_metrics: portfolio and benchmark lengths differ");
        if (portfolio.size() < 2)
            throw std::invalid_argument("compute_metrics: need at least two returns");

        const double rf_daily = risk_free_rate / kTradingDaysPerYear;
        MetricsReport m;
        m.num_days = portfolio.size();
        m.mean_daily_return = detail::mean(portfolio);
        m.volatility_daily = std::sqrt(detail::covariance(portfolio, portfolio));
        m.volatility_annualized = m.volatility_daily * std::sqrt(kTradingDaysPerYear);
        m.sharpe_annualized = m.volatility_daily > 0.0
                                  ? (m.mean_daily_return - rf_daily) / m.volatility_daily * std::sqrt(kTradingDaysPerYear)
                                  : 0.0;

        const double bench_var = detail::covariance(benchmark, benchmark);
        if (bench_var > 0.0)
        {
            const double beta = detail::covariance(portfolio, benchmark) / bench_var;
            m.beta = beta;
            m.alpha_daily = m.mean_daily_return - rf_daily - beta * (detail::mean(benchmark) - rf_daily);
        }
        m.final_value = equity_curve(portfolio, initial_investment).back();
        return m;
    }

    inline nlohmann::json to_json(const MetricsReport &m)
    {
        nlohmann::json j;
        j["mean_daily_return"] = m.mean_daily_return;
        j["volatility_daily"] = m.volatility_daily;
        j["volatility_annualized"] = m.volatility_annualized;
        j["sharpe_annualized"] = m.sharpe_annualized;
        j["alpha_daily"] = m.alpha_daily ? nlohmann::json(*m.alpha_daily) : nlohmann::json(nullptr);
        j["beta"] = m.beta ? nlohmann::json(*m.beta) : nlohmann::json(nullptr);
        j["final_value"] = m.final_value;
        j["num_days"] = m.num_days;
        return j;
    }

    inline MetricsReport metrics_from_json(const nlohmann::json &j)
    {
        MetricsReport m;
        m.mean_daily_return = j.at("mean_daily_return").get<double>();
        m.volatility_daily = j.at("volatility_daily").get<double>();
        m.volatility_annualized = j.at("volatility_annualized").get<double>();
        m.sharpe_annualized = j.at("sharpe_annualized").get<double>();
        if (!j.at("alpha_daily").is_null())
            m.alpha_daily = j.at("alpha_daily").get<double>();
        if (!j.at("beta").is_null())
            m.beta = j.at("beta").get<double>();
        m.final_value = j.at("final_value").get<double>();
        m.num_days = j.at("num_days").get<std::size_t>();
        return m;
    }

    /// One row of the strategy comparison table; metrics empty when the strategy failed.
    struct ComparisonRow
    {
        std::string strategy;
        std::optional<MetricsReport> metrics;
        std::string error;
    };

    /// `strategy,mean_daily,vol_annual,sharpe,alpha_daily,beta,final_value`; failed rows carry "failed".
    inline void write_comparison_csv(std::ostream &out, const std::vector<ComparisonRow> &rows)
    {
        out << "strategy,mean_daily,vol_annual,sharpe,alpha_daily,beta,final_value\n";
        out << std::setprecision(std::numeric_limits<double>::max_digits10);
        for (const auto &row : rows)
        {
            out << row.strategy;
            if (!row.metrics)
            {
                out << ",failed,,,,,\n";
                continue;
            }
            const auto &m = *row.metrics;
            out << ',' << m.mean_daily_return << ',' << m.volatility_annualized << ',' << m.sharpe_annualized << ',';
            if (m.alpha_daily)
                out << *m.alpha_daily;
            out << ',';
            if (m.beta)
                out << *m.beta;
            out << ',' << m.final_value << '\n';
        }
    }

} // namespace qalloc
