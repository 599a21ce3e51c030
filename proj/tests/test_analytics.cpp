#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "test_support.hpp"

using namespace qalloc;

namespace
{
    ReturnTable returns_from(const Eigen::MatrixXd &r)
    {
        ReturnTable t;
        t.returns = r;
        for (Eigen::Index c = 0; c < r.cols(); ++c)
            t.assets.push_back("A" + std::to_string(c));
        t.dates = business_days(Date{std::chrono::year{2020}, std::chrono::January, std::chrono::day{1}},
                                static_cast<std::size_t>(r.rows()));
        return t;
    }

    Eigen::MatrixXd random_spd(Eigen::Index n, Rng &rng)
    {
        Eigen::MatrixXd a(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                a(i, j) = 0.1 * rng.normal();
        return a * a.transpose() + 1e-3 * Eigen::MatrixXd::Identity(n, n);
    }

    /// OLS of y on [1, x] by the 2x2 normal equations, solved with Cramer's rule.
    std::pair<double, double> ols(const std::vector<double> &x, const std::vector<double> &y)
    {
        const double n = static_cast<double>(x.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < x.size(); ++i)
        {
            sx += x[i];
            sy += y[i];
            sxx += x[i] * x[i];
            sxy += x[i] * y[i];
        }
        const double det = n * sxx - sx * sx;
        const double intercept = (sy * sxx - sx * sxy) / det;
        const double slope = (n * sxy - sx * sy) / det;
        return {intercept, slope};
    }
} // namespace

TEST(MinVariance, DiagonalHandSolved)
{
    // inverse diag (25, 100), normalized by 125
    Eigen::MatrixXd cov = Eigen::Vector2d(0.04, 0.01).asDiagonal();
    auto w = min_variance_weights(cov, 0.0);
    EXPECT_NEAR(w.weights[0], 0.2, 1e-15);
    EXPECT_NEAR(w.weights[1], 0.8, 1e-15);
    EXPECT_TRUE(is_valid(w));
}

TEST(MinVariance, IdenticalAssetsEqualWeights)
{
    Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(4, 4, 0.3) + 0.7 * Eigen::MatrixXd::Identity(4, 4);
    auto w = min_variance_weights(cov, 1e-8);
    for (Eigen::Index i = 0; i < 4; ++i)
        EXPECT_NEAR(w.weights[i], 0.25, 1e-12);
}

TEST(MinVariance, BeatsSimplexGridAndEqualWeights)
{
    Rng rng(101);
    for (int instance = 0; instance < 3; ++instance)
    {
        const Eigen::MatrixXd cov = random_spd(3, rng);
        const auto w = min_variance_weights(cov, 0.0);
        const double best = portfolio_variance(w.weights, cov);
        EXPECT_NEAR(w.weights.sum(), 1.0, 1e-12);
        for (int i = 0; i <= 100; ++i)
            for (int j = 0; j <= 100 - i; ++j)
            {
                Eigen::Vector3d g(i / 100.0, j / 100.0, (100 - i - j) / 100.0);
                ASSERT_LE(best, portfolio_variance(g, cov) + 1e-12);
            }
        EXPECT_LE(best, portfolio_variance(equal_weights(3).weights, cov) + 1e-15);
    }
}

TEST(MinVariance, SingularRejectedWithDiagnostic)
{
    Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(2, 2, 0.01);
    try
    {
        min_variance_weights(cov, 0.0);
        FAIL() << "expected NumericError";
    }
    catch (const NumericError &e)
    {
        EXPECT_NE(std::string(e.what()).find("condition"), std::string::npos);
    }
    EXPECT_NO_THROW(min_variance_weights(cov, 1e-4));
}

TEST(MinVariance, NeedsNPlusTwoRows)
{
    Rng rng(1);
    Eigen::MatrixXd r(4, 3);
    for (auto &v : r.reshaped())
        v = 0.01 * rng.normal();
    EXPECT_THROW(min_variance_weights(returns_from(r), 1e-8), InsufficientHistory);
    Eigen::MatrixXd r5(5, 3);
    for (auto &v : r5.reshaped())
        v = 0.01 * rng.normal();
    EXPECT_NO_THROW(min_variance_weights(returns_from(r5), 1e-8));
}

TEST(SampleCovariance, DivisorNMinusOne)
{
    Eigen::MatrixXd r(3, 1);
    r << 1, 2, 3;
    EXPECT_DOUBLE_EQ(sample_covariance(r)(0, 0), 1.0);
}

TEST(MaxReturn, ArgmaxAndTieBreak)
{
    Eigen::MatrixXd r(2, 3);
    r << 0.001, 0.002, -0.001, 0.001, 0.002, -0.001;
    auto w = max_return_weights(returns_from(r));
    EXPECT_EQ(w.weights, Eigen::Vector3d(0, 1, 0));

    Eigen::MatrixXd tie(2, 3);
    tie << 0.003, 0.001, 0.003, 0.001, 0.0, 0.001;
    EXPECT_EQ(max_return_weights(returns_from(tie)).weights, Eigen::Vector3d(1, 0, 0));
}

TEST(MaxReturn, VertexBeatsSimplexGrid)
{
    Rng rng(5);
    Eigen::MatrixXd r(50, 3);
    for (auto &v : r.reshaped())
        v = 0.01 * rng.normal();
    const Eigen::RowVectorXd mu = r.colwise().mean();
    const auto w = max_return_weights(returns_from(r));
    const double best = mu.dot(w.weights);
    for (int i = 0; i <= 100; ++i)
        for (int j = 0; j <= 100 - i; ++j)
        {
            Eigen::Vector3d g(i / 100.0, j / 100.0, (100 - i - j) / 100.0);
            ASSERT_LE(mu.dot(g), best + 1e-15);
        }
}

TEST(EqualWeights, Basics)
{
    EXPECT_EQ(equal_weights(4).weights, Eigen::Vector4d::Constant(0.25));
    EXPECT_EQ(equal_weights(1).weights[0], 1.0);
    EXPECT_THROW(equal_weights(0), std::invalid_argument);
    for (std::size_t n = 1; n <= 1000; ++n)
        ASSERT_NEAR(equal_weights(n).weights.sum(), 1.0, 1e-9);
}

TEST(EquityCurve, Examples)
{
    std::vector<double> zeros(5, 0.0);
    for (double v : equity_curve(zeros, 3.0))
        EXPECT_EQ(v, 3.0);
    std::vector<double> r{0.10, -0.10};
    auto c = equity_curve(r, 1.0);
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c[0], 1.0);
    EXPECT_NEAR(c[1], 1.10, 1e-15);
    EXPECT_NEAR(c[2], 0.99, 1e-15);
    std::vector<double> bust{0.1, -1.0};
    EXPECT_THROW(equity_curve(bust, 1.0), DataError);
}

TEST(EquityCurve, LogIdentity)
{
    Rng rng(6);
    std::vector<double> r(500);
    double log_sum = 0;
    for (auto &v : r)
    {
        v = 0.02 * rng.normal();
        log_sum += std::log1p(v);
    }
    EXPECT_NEAR(std::log(equity_curve(r, 1.0).back()), log_sum, 1e-10);
}

TEST(Metrics, SelfRegressionAndScaling)
{
    Rng rng(7);
    std::vector<double> rb(100), rp(100);
    for (std::size_t i = 0; i < rb.size(); ++i)
    {
        rb[i] = 0.01 * rng.normal();
        rp[i] = 2.0 * rb[i];
    }
    auto self = compute_metrics(rb, rb, 0.0);
    ASSERT_TRUE(self.beta && self.alpha_daily);
    EXPECT_NEAR(*self.beta, 1.0, 1e-12);
    EXPECT_NEAR(*self.alpha_daily, 0.0, 1e-15);
    auto twice = compute_metrics(rp, rb, 0.0);
    EXPECT_NEAR(*twice.beta, 2.0, 1e-12);
    EXPECT_NEAR(*twice.alpha_daily, 0.0, 1e-15);
}

TEST(Metrics, AlphaBetaMatchOls)
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
    {
        Rng rng(seed);
        std::vector<double> rb(100), rp(100);
        for (std::size_t i = 0; i < rb.size(); ++i)
        {
            rb[i] = 0.0005 + 0.01 * rng.normal();
            rp[i] = 0.0002 + 0.7 * rb[i] + 0.005 * rng.normal();
        }
        auto m = compute_metrics(rp, rb, 0.0);
        auto [alpha, beta] = ols(rb, rp);
        EXPECT_NEAR(*m.beta, beta, 1e-10);
        EXPECT_NEAR(*m.alpha_daily, alpha, 1e-10);
    }
}

TEST(Metrics, RiskFreeRateEntersAlphaAndSharpe)
{
    Rng rng(8);
    std::vector<double> rb(60), rp(60);
    for (std::size_t i = 0; i < rb.size(); ++i)
    {
        rb[i] = 0.01 * rng.normal();
        rp[i] = 0.5 * rb[i] + 0.003 * rng.normal();
    }
    const double rf = 0.0252;
    auto m = compute_metrics(rp, rb, rf);
    auto [alpha, beta] = ols(rb, rp);
    // regression of excess returns: alpha_excess = alpha - rf_d (1 - beta)
    EXPECT_NEAR(*m.alpha_daily, alpha - 0.0001 * (1.0 - beta), 1e-10);
    EXPECT_NEAR(m.sharpe_annualized, (m.mean_daily_return - 0.0001) / m.volatility_daily * std::sqrt(252.0), 1e-12);
}

TEST(Metrics, SharpeWithZeroRiskFreeIsExact)
{
    Rng rng(9);
    std::vector<double> r(100);
    for (auto &v : r)
        v = 0.001 + 0.01 * rng.normal();
    auto m = compute_metrics(r, r, 0.0);
    EXPECT_EQ(m.sharpe_annualized, m.mean_daily_return / m.volatility_daily * std::sqrt(252.0));
    EXPECT_EQ(m.volatility_annualized, m.volatility_daily * std::sqrt(252.0));
    EXPECT_EQ(m.num_days, 100u);
}

TEST(Metrics, VolatilityIsSampleStdDev)
{
    std::vector<double> r{0.01, -0.01, 0.02, 0.0};
    // mean 0.005, squared deviations sum 0.00025 + 0.000225 + 0.000225 + 0.000025 = 0.0005 -> /3
    auto m = compute_metrics(r, r, 0.0);
    EXPECT_NEAR(m.mean_daily_return, 0.005, 1e-17);
    EXPECT_NEAR(m.volatility_daily, std::sqrt(0.0005 / 3.0), 1e-15);
}

TEST(Metrics, ConstantBenchmarkLeavesAlphaBetaUndefined)
{
    std::vector<double> flat(10, 0.0);
    std::vector<double> r{0.01, 0.0, -0.01, 0.02, 0.0, 0.0, 0.01, 0.0, -0.02, 0.0};
    auto m = compute_metrics(r, flat, 0.0);
    EXPECT_FALSE(m.beta.has_value());
    EXPECT_FALSE(m.alpha_daily.has_value());
    auto z = compute_metrics(flat, flat, 0.0);
    EXPECT_EQ(z.mean_daily_return, 0.0);
    EXPECT_EQ(z.volatility_daily, 0.0);
    EXPECT_EQ(z.sharpe_annualized, 0.0);
    EXPECT_EQ(z.final_value, 1.0);
}

TEST(Metrics, PreconditionErrors)
{
    std::vector<double> a{0.1, 0.2}, b{0.1};
    EXPECT_THROW(compute_metrics(a, b, 0.0), std::invalid_argument);
    EXPECT_THROW(compute_metrics(b, b, 0.0), std::invalid_argument);
}

TEST(Metrics, JsonRoundTrip)
{
    Rng rng(10);
    std::vector<double> rb(30), rp(30);
    for (std::size_t i = 0; i < rb.size(); ++i)
    {
        rb[i] = 0.01 * rng.normal();
        rp[i] = 0.01 * rng.normal();
    }
    auto m = compute_metrics(rp, rb, 0.01, 5.0);
    auto j = to_json(m);
    for (const char *key : {"mean_daily_return", "volatility_daily", "volatility_annualized", "sharpe_annualized",
                            "alpha_daily", "beta", "final_value", "num_days"})
        EXPECT_TRUE(j.contains(key)) << key;
    auto back = metrics_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.mean_daily_return, m.mean_daily_return);
    EXPECT_EQ(back.beta, m.beta);
    EXPECT_EQ(back.final_value, m.final_value);
    EXPECT_EQ(back.num_days, m.num_days);
}

TEST(ComparisonCsv, HeaderAndFailedRow)
{
    std::vector<double> r{0.01, -0.01, 0.02};
    std::vector<ComparisonRow> rows{{"equal_weight", compute_metrics(r, r, 0.0), {}}, {"drl", std::nullopt, "boom"}};
    std::ostringstream out;
    write_comparison_csv(out, rows);
    std::istringstream in(out.str());
    std::string header, first, second;
    std::getline(in, header);
    std::getline(in, first);
    std::getline(in, second);
    EXPECT_EQ(header, "strategy,mean_daily,vol_annual,sharpe,alpha_daily,beta,final_value");
    EXPECT_EQ(first.rfind("equal_weight,", 0), 0u);
    EXPECT_EQ(std::count(first.begin(), first.end(), ','), 6);
    EXPECT_EQ(second, "drl,failed,,,,,");
}
