#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <filesystem>
#include <string>

#include "qalloc/qalloc.hpp"

namespace qalloc::testing
{
    /// Business-day dated table from an explicit price matrix.
    inline PriceTable make_table(const Eigen::MatrixXd &prices)
    {
        PriceTable t;
        t.dates = business_days(Date{std::chrono::year{2020}, std::chrono::January, std::chrono::day{1}},
                                static_cast<std::size_t>(prices.rows()));
        for (Eigen::Index c = 0; c < prices.cols(); ++c)
            t.assets.push_back("A" + std::to_string(c));
        t.prices = prices;
        return t;
    }

    /// Independent random walks, strictly positive.
    inline PriceTable random_table(std::size_t rows, std::size_t assets, std::uint64_t seed, double vol = 0.02)
    {
        SyntheticMarketSpec spec;
        spec.days = rows;
        for (std::size_t i = 0; i < assets; ++i)
            spec.assets.push_back({"A" + std::to_string(i), 0.0005 * static_cast<double>(i), vol, 10.0 + 5.0 * i});
        return generate_synthetic_market(spec, seed);
    }

    inline std::filesystem::path temp_dir(const std::string &name)
    {
        auto dir = std::filesystem::temp_directory_path() / ("qalloc_test_" + name);
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
        return dir;
    }

    inline Environment make_env(const PriceTable &table, std::size_t window, Regime regime = Regime::LongOnly,
                                double initial = 1.0)
    {
        return Environment(make_features(table, TrendModel::fit(table, true), 0, MovingAverageSource::Detrended),
                           window, regime, initial);
    }

} // namespace qalloc::testing
