#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "qalloc/config.hpp"
#include "qalloc/market_data.hpp"
#include "qalloc/rng.hpp"

namespace qalloc
{
    inline bool is_weekday(const Date &d)
    {
        const std::chrono::weekday wd{std::chrono::sys_days{d}};
        return wd != std::chrono::Saturday && wd != std::chrono::Sunday;
    }

    /// @p count consecutive weekdays starting at (or after) @p first.
    inline std::vector<Date> business_days(Date first, std::size_t count)
    {
        std::vector<Date> out;
        out.reserve(count);
        std::chrono::sys_days day{first};
        while (out.size() < count)
        {
            if (is_weekday(Date{day}))
                out.emplace_back(day);
            day += std::chrono::days{1};
        }
        return out;
    }

    /**
     * @brief Correlated geometric random walks on business days.
     *
     * log(p[t+1]/p[t]) = drift_i - vol_i^2 / 2 + vol_i * z_i with z ~ N(0, C),
     * so the expected gross daily return of asset i is exp(drift_i).
     */
    inline PriceTable generate_synthetic_market(const SyntheticMarketSpec &spec, std::uint64_t seed)
    {
        const auto n = static_cast<Eigen::Index>(spec.assets.size());
        if (n == 0)
            throw ConfigError("synthetic market needs at least one asset");

        Eigen::MatrixXd corr(n, n);
        if (spec.correlation.size() == 1)
        {
            corr.setConstant(spec.correlation.front());
            corr.diagonal().setOnes();
        }
        else
        {
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j)
                    corr(i, j) = spec.correlation[static_cast<std::size_t>(i * n + j)];
        }
        Eigen::LLT<Eigen::MatrixXd> llt(corr);
        if (llt.info() != Eigen::Success)
            throw ConfigError("synthetic correlation matrix is not positive definite");
        const Eigen::MatrixXd chol = llt.matrixL();

        Rng rng(seed);
        PriceTable table;
        table.dates = business_days(spec.start_date, spec.days);
        table.prices.resize(static_cast<Eigen::Index>(spec.days), n);
        for (const auto &a : spec.assets)
            table.assets.push_back(a.name);
        for (Eigen::Index i = 0; i < n; ++i)
            table.prices(0, i) = spec.assets[static_cast<std::size_t>(i)].start_price;

        Eigen::VectorXd eps(n);
        for (Eigen::Index t = 1; t < static_cast<Eigen::Index>(spec.days); ++t)
        {
            for (Eigen::Index i = 0; i < n; ++i)
                eps[i] = rng.normal();
            const Eigen::VectorXd z = chol * eps;
            for (Eigen::Index i = 0; i < n; ++i)
            {
                const auto &a = spec.assets[static_cast<std::size_t>(i)];
                table.prices(t, i) = table.prices(t - 1, i) * std::exp(a.drift - 0.5 * a.vol * a.vol + a.vol * z[i]);
            }
        }
        return table;
    }

    /// `date,<asset...>` with round-trip precision; NaN cells are written empty.
    inline void write_price_csv(std::ostream &out, const PriceTable &table)
    {
        out << "date";
        for (const auto &a : table.assets)
            out << ',' << a;
        out << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
        for (std::size_t r = 0; r < table.num_rows(); ++r)
        {
            out << format_date(table.dates[r]);
            for (Eigen::Index c = 0; c < table.prices.cols(); ++c)
            {
                out << ',';
                const double v = table.prices(static_cast<Eigen::Index>(r), c);
                if (std::isfinite(v))
                    out << v;
            }
            out << '\n';
        }
    }

} // namespace qalloc
