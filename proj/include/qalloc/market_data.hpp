/**
 * @file market_data.hpp
 * @brief Loading, filtering and per-asset preprocessing of daily price series.
 *
 * Prices are held as a dates x assets matrix of adjusted closes. Raw loads
 * may contain gaps (NaN); drop_incomplete_rows() produces the complete table
 * every downstream computation expects.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qalloc/date.hpp"
#include "qalloc/errors.hpp"

namespace qalloc
{
    /**
     * @brief Date-aligned adjusted close prices, one row per date, one column per asset.
     *
     * After drop_incomplete_rows() every cell is finite and strictly positive.
     */
    struct PriceTable
    {
        std::vector<Date> dates;
        std::vector<std::string> assets;
        Eigen::MatrixXd prices; ///< rows = dates, cols = assets

        std::size_t num_rows() const { return dates.size(); }
        std::size_t num_assets() const { return assets.size(); }

        bool row_complete(std::size_t r) const
        {
            for (Eigen::Index c = 0; c < prices.cols(); ++c)
            {
                const double v = prices(static_cast<Eigen::Index>(r), c);
                if (!std::isfinite(v) || v <= 0.0)
                    return false;
            }
            return true;
        }

        /// Rows [first, last).
        PriceTable slice(std::size_t first, std::size_t last) const
        {
            PriceTable out;
            out.assets = assets;
            out.dates.assign(dates.begin() + static_cast<std::ptrdiff_t>(first),
                             dates.begin() + static_cast<std::ptrdiff_t>(last));
            out.prices = prices.middleRows(static_cast<Eigen::Index>(first),
                                           static_cast<Eigen::Index>(last - first));
            return out;
        }

        /// Row index range [first, last) of dates inside the closed range.
        std::pair<std::size_t, std::size_t> row_span(const DateRange &range) const
        {
            auto lo = std::lower_bound(dates.begin(), dates.end(), range.start);
            auto hi = std::upper_bound(dates.begin(), dates.end(), range.end);
            if (hi < lo)
                hi = lo;
            return {static_cast<std::size_t>(lo - dates.begin()),
                    static_cast<std::size_t>(hi - dates.begin())};
        }

        PriceTable within(const DateRange &range) const
        {
            auto [first, last] = row_span(range);
            return slice(first, last);
        }

        std::optional<std::size_t> asset_index(std::string_view id) const
        {
            auto it = std::find(assets.begin(), assets.end(), id);
            if (it == assets.end())
                return std::nullopt;
            return static_cast<std::size_t>(it - assets.begin());
        }

        bool operator==(const PriceTable &other) const
        {
            return dates == other.dates && assets == other.assets &&
                   prices.rows() == other.prices.rows() && prices.cols() == other.prices.cols() &&
                   (prices.array() == other.prices.array()).all();
        }
    };

    /// Simple daily returns; row t is the move from price row t to t+1.
    struct ReturnTable
    {
        std::vector<Date> dates; ///< date of the later price of each move
        std::vector<std::string> assets;
        Eigen::MatrixXd returns;

        std::size_t num_rows() const { return dates.size(); }
        std::size_t num_assets() const { return assets.size(); }
    };

    namespace detail
    {
        inline std::string_view trim(std::string_view s)
        {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"'))
                s.remove_prefix(1);
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
                s.remove_suffix(1);
            return s;
        }

        inline std::vector<std::string_view> split_csv_line(std::string_view line)
        {
            std::vector<std::string_view> cells;
            std::size_t start = 0;
            while (true)
            {
                const auto comma = line.find(',', start);
                if (comma == std::string_view::npos)
                {
                    cells.push_back(trim(line.substr(start)));
                    break;
                }
                cells.push_back(trim(line.substr(start, comma - start)));
                start = comma + 1;
            }
            return cells;
        }

        /// NaN for empty or non-numeric cells.
        inline double parse_price(std::string_view cell)
        {
            if (cell.empty())
                return std::numeric_limits<double>::quiet_NaN();
            double value = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (ec != std::errc{} || ptr != cell.data() + cell.size())
                return std::numeric_limits<double>::quiet_NaN();
            return value;
        }
    } // namespace detail

    /**
     * @brief Parses a price CSV: header `date,<asset1>,<asset2>,...`, ISO dates, decimal prices.
     *
     * Empty or non-numeric cells become NaN (removed later by drop_incomplete_rows).
     * Rows are returned sorted by date. Errors name the 1-based file line.
     */
    inline PriceTable read_price_csv(std::istream &in,
                                     const std::optional<std::vector<std::string>> &asset_filter = std::nullopt)
    {
        std::string line;
        std::size_t line_no = 0;
        std::vector<std::string_view> header;
        std::string header_line;
        while (std::getline(in, header_line))
        {
            ++line_no;
            if (!detail::trim(header_line).empty())
                break;
        }
        header = detail::split_csv_line(header_line);
        if (header.size() < 2)
            throw DataError("price CSV needs a date column and at least one asset column");

        std::vector<std::string> all_assets;
        for (std::size_t i = 1; i < header.size(); ++i)
        {
            if (header[i].empty())
                throw DataError("empty asset name in header column " + std::to_string(i + 1));
            all_assets.emplace_back(header[i]);
        }

        std::vector<std::size_t> columns;
        std::vector<std::string> assets;
        if (asset_filter)
        {
            for (const auto &id : *asset_filter)
            {
                auto it = std::find(all_assets.begin(), all_assets.end(), id);
                if (it == all_assets.end())
                    throw DataError("asset '" + id + "' not present in price file");
                columns.push_back(static_cast<std::size_t>(it - all_assets.begin()));
                assets.push_back(id);
            }
            if (columns.empty())
                throw DataError("asset filter selects no columns");
        }
        else
        {
            columns.resize(all_assets.size());
            std::iota(columns.begin(), columns.end(), std::size_t{0});
            assets = all_assets;
        }

        struct Row
        {
            Date date;
            std::vector<double> values;
            std::size_t line;
        };
        std::vector<Row> rows;
        while (std::getline(in, line))
        {
            ++line_no;
            if (detail::trim(line).empty())
                continue;
            auto cells = detail::split_csv_line(line);
            if (cells.size() > header.size())
                throw DataError("line " + std::to_string(line_no) + ": more cells than header columns");
            auto date = parse_date(cells[0]);
            if (!date)
                throw DataError("line " + std::to_string(line_no) + ": unparseable date '" +
                                std::string(cells[0]) + "'");
            Row row{*date, {}, line_no};
            row.values.reserve(columns.size());
            for (auto c : columns)
            {
                const std::size_t cell = c + 1;
                row.values.push_back(cell < cells.size() ? detail::parse_price(cells[cell])
                                                         : std::numeric_limits<double>::quiet_NaN());
            }
            rows.push_back(std::move(row));
        }

        std::stable_sort(rows.begin(), rows.end(), [](const Row &a, const Row &b) { return a.date < b.date; });
        for (std::size_t i = 1; i < rows.size(); ++i)
        {
            if (rows[i].date == rows[i - 1].date)
                throw DataError("line " + std::to_string(std::max(rows[i].line, rows[i - 1].line)) +
                                ": duplicate date " + format_date(rows[i].date));
        }

        PriceTable table;
        table.assets = std::move(assets);
        table.prices.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(columns.size()));
        table.dates.reserve(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r)
        {
            table.dates.push_back(rows[r].date);
            for (std::size_t c = 0; c < columns.size(); ++c)
                table.prices(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r].values[c];
        }
        return table;
    }

    /// File variant of read_price_csv(). Missing cells are kept as NaN.
    inline PriceTable load_price_table(const std::string &path,
                                       const std::optional<std::vector<std::string>> &asset_filter = std::nullopt)
    {
        std::ifstream in(path);
        if (!in)
            throw DataError("cannot open price file '" + path + "'");
        return read_price_csv(in, asset_filter);
    }

    /**
     * @brief Removes every row holding a missing, non-finite or non-positive price.
     *
     * Relative order is preserved. Throws InsufficientHistory when fewer than
     * window + 2 rows survive.
     */
    inline PriceTable drop_incomplete_rows(const PriceTable &table, std::size_t window)
    {
        std::vector<Eigen::Index> keep;
        keep.reserve(table.num_rows());
        for (std::size_t r = 0; r < table.num_rows(); ++r)
            if (table.row_complete(r))
                keep.push_back(static_cast<Eigen::Index>(r));

        const std::size_t need = window + 2;
        if (keep.size() < need)
            throw InsufficientHistory(keep.size(), need);

        PriceTable out;
        out.assets = table.assets;
        out.prices.resize(static_cast<Eigen::Index>(keep.size()), table.prices.cols());
        out.dates.reserve(keep.size());
        for (std::size_t i = 0; i < keep.size(); ++i)
        {
            out.dates.push_back(table.dates[static_cast<std::size_t>(keep[i])]);
            out.prices.row(static_cast<Eigen::Index>(i)) = table.prices.row(keep[i]);
        }
        return out;
    }

    /// Ordinary least-squares line y ~ intercept + slope * t over t = 0..n-1.
    struct LineFit
    {
        double intercept = 0.0;
        double slope = 0.0;

        double at(double t) const { return intercept + slope * t; }
    };

    inline LineFit fit_line(std::span<const double> series)
    {
        if (series.size() < 2)
            throw std::invalid_argument("fit_line: need at least two points");
        const double n = static_cast<double>(series.size());
        const double t_mean = (n - 1.0) / 2.0;
        double y_mean = 0.0;
        for (double y : series)
            y_mean += y;
        y_mean /= n;

        double sxy = 0.0;
        double sxx = 0.0;
        for (std::size_t i = 0; i < series.size(); ++i)
        {
            const double dt = static_cast<double>(i) - t_mean;
            sxy += dt * (series[i] - y_mean);
            sxx += dt * dt;
        }
        const double slope = sxy / sxx;
        return {y_mean - slope * t_mean, slope};
    }

    /// Residuals of the least-squares line: zero mean and zero slope up to rounding.
    inline std::vector<double> detrend_linear(std::span<const double> series)
    {
        if (series.size() < 2)
            throw std::invalid_argument("detrend_linear: need at least two points");
        const LineFit line = fit_line(series);
        std::vector<double> out(series.size());
        for (std::size_t i = 0; i < series.size(); ++i)
            out[i] = series[i] - line.at(static_cast<double>(i));
        return out;
    }

    inline ReturnTable simple_returns(const PriceTable &table)
    {
        if (table.num_rows() < 2)
            throw std::invalid_argument("simple_returns: need at least two price rows");
        ReturnTable out;
        out.assets = table.assets;
        out.dates.assign(table.dates.begin() + 1, table.dates.end());
        const Eigen::Index n = table.prices.rows() - 1;
        out.returns = (table.prices.bottomRows(n).array() / table.prices.topRows(n).array() - 1.0).matrix();
        return out;
    }

    /// Mean of series[t - window + 1 .. t].
    inline double moving_average(std::span<const double> series, std::size_t window, std::size_t t)
    {
        if (window == 0)
            throw std::invalid_argument("moving_average: window must be positive");
        if (t + 1 < window)
            throw InsufficientHistory(t + 1, window);
        if (t >= series.size())
            throw std::out_of_range("moving_average: index past end of series");
        double sum = 0.0;
        for (std::size_t i = t + 1 - window; i <= t; ++i)
            sum += series[i];
        return sum / static_cast<double>(window);
    }

    /**
     * @brief Pearson correlation of the columns of @p values over rows t-window+1..t.
     *
     * Symmetric with unit diagonal; entries clamped to [-1, 1]. A pair where either
     * column is constant over the window gets 0 off the diagonal.
     */
    inline Eigen::MatrixXd rolling_correlation(const Eigen::MatrixXd &values, std::size_t t, std::size_t window)
    {
        if (window < 2)
            throw std::invalid_argument("rolling_correlation: window must be at least 2");
        if (t + 1 < window)
            throw InsufficientHistory(t + 1, window);
        if (t >= static_cast<std::size_t>(values.rows()))
            throw std::out_of_range("rolling_correlation: index past end of table");

        const Eigen::Index n = values.cols();
        const auto block = values.middleRows(static_cast<Eigen::Index>(t + 1 - window),
                                             static_cast<Eigen::Index>(window));
        const Eigen::RowVectorXd mean = block.colwise().mean();
        const Eigen::MatrixXd centered = block.rowwise() - mean;
        const Eigen::MatrixXd cross = centered.transpose() * centered;

        Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
        {
            for (Eigen::Index j = i + 1; j < n; ++j)
            {
                const double denom = std::sqrt(cross(i, i) * cross(j, j));
                double r = 0.0;
                if (denom > 0.0 && std::isfinite(denom))
                    r = std::clamp(cross(i, j) / denom, -1.0, 1.0);
                corr(i, j) = r;
                corr(j, i) = r;
            }
        }
        return corr;
    }

    inline Eigen::MatrixXd rolling_correlation(const PriceTable &table, std::size_t t, std::size_t window)
    {
        return rolling_correlation(table.prices, t, window);
    }

    /**
     * @brief Per-asset price scale and linear trend, fitted on one table and
     *        applicable (by extrapolation) to later rows.
     *
     * Row 0 of the fitting table is time origin 0. Scale is the first price of
     * each asset when scaling is enabled, 1 otherwise.
     */
    struct TrendModel
    {
        std::vector<double> scale;
        std::vector<LineFit> lines;

        static TrendModel fit(const PriceTable &table, bool scale_by_first_price)
        {
            TrendModel model;
            const auto n = table.num_assets();
            model.scale.resize(n, 1.0);
            model.lines.resize(n);
            std::vector<double> column(table.num_rows());
            for (std::size_t a = 0; a < n; ++a)
            {
                const auto col = static_cast<Eigen::Index>(a);
                if (scale_by_first_price)
                    model.scale[a] = table.prices(0, col);
                for (std::size_t r = 0; r < table.num_rows(); ++r)
                    column[r] = table.prices(static_cast<Eigen::Index>(r), col) / model.scale[a];
                model.lines[a] = fit_line(column);
            }
            return model;
        }

        /// Scaled prices, without trend removal.
        Eigen::MatrixXd scaled(const Eigen::MatrixXd &prices) const
        {
            Eigen::MatrixXd out = prices;
            for (Eigen::Index a = 0; a < out.cols(); ++a)
                out.col(a) /= scale[static_cast<std::size_t>(a)];
            return out;
        }

        /// Scaled prices minus the fitted line; row r sits at time origin_offset + r.
        Eigen::MatrixXd detrended(const Eigen::MatrixXd &prices, std::ptrdiff_t origin_offset) const
        {
            Eigen::MatrixXd out = scaled(prices);
            for (Eigen::Index a = 0; a < out.cols(); ++a)
            {
                const auto &line = lines[static_cast<std::size_t>(a)];
                for (Eigen::Index r = 0; r < out.rows(); ++r)
                    out(r, a) -= line.at(static_cast<double>(origin_offset + r));
            }
            return out;
        }
    };

} // namespace qalloc
