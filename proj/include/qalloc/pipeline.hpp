/**
 * @file pipeline.hpp
 * @brief Config-driven runs: ingest, train, backtest, compare, synth.
 *
 * Every command is deterministic given its config and input files; the only
 * non-reproducible output is the wall-clock duration in the run manifest.
 */

#pragma once

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qalloc/agent.hpp"
#include "qalloc/analytics.hpp"
#include "qalloc/config.hpp"
#include "qalloc/environment.hpp"
#include "qalloc/market_data.hpp"
#include "qalloc/qnet.hpp"
#include "qalloc/synth.hpp"

namespace qalloc
{
    namespace fs = std::filesystem;

    /// The filtered price table split into disjoint training and test ranges.
    struct Dataset
    {
        PriceTable raw;      ///< as read, gaps included
        PriceTable filtered; ///< complete rows only
        PriceTable train;
        PriceTable test;
        std::size_t train_first_row = 0; ///< index of train row 0 in filtered
        std::size_t test_first_row = 0;
    };

    inline Dataset make_dataset(PriceTable raw, const Config &config)
    {
        Dataset d;
        d.raw = std::move(raw);
        d.filtered = drop_incomplete_rows(d.raw, config.window);
        auto [tr0, tr1] = d.filtered.row_span(config.train_range);
        auto [te0, te1] = d.filtered.row_span(config.test_range);
        if (tr1 - tr0 < config.window + 1)
            throw InsufficientHistory(tr1 - tr0, config.window + 1);
        if (te1 - te0 < config.window + 1)
            throw InsufficientHistory(te1 - te0, config.window + 1);
        d.train_first_row = tr0;
        d.test_first_row = te0;
        d.train = d.filtered.slice(tr0, tr1);
        d.test = d.filtered.slice(te0, te1);
        return d;
    }

    inline Dataset load_dataset(const Config &config)
    {
        if (config.data.empty())
            throw ConfigError("config: 'data' (price CSV path) is required");
        return make_dataset(load_price_table(config.data, config.assets), config);
    }

    inline std::string file_digest(const fs::path &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw DataError("cannot read '" + path.string() + "'");
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return hex64(fnv1a64(bytes));
    }

    inline void write_text(const fs::path &path, const std::string &text)
    {
        if (path.has_parent_path())
            fs::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write '" + path.string() + "'");
        out << text;
    }

    // ingest ----------------------------------------------------------------

    struct AssetSpan
    {
        std::string asset;
        std::optional<Date> first;
        std::optional<Date> last;
        std::size_t valid_rows = 0;
    };

    struct IngestSummary
    {
        std::size_t num_assets = 0;
        std::size_t rows_raw = 0;
        std::size_t rows_filtered = 0;
        std::size_t rows_train = 0;
        std::size_t rows_test = 0;
        std::vector<AssetSpan> spans;

        nlohmann::json to_json() const
        {
            nlohmann::json j;
            j["num_assets"] = num_assets;
            j["rows_raw"] = rows_raw;
            j["rows_filtered"] = rows_filtered;
            j["rows_train"] = rows_train;
            j["rows_test"] = rows_test;
            j["assets"] = nlohmann::json::array();
            for (const auto &s : spans)
                j["assets"].push_back({{"asset", s.asset},
                                       {"first", s.first ? format_date(*s.first) : ""},
                                       {"last", s.last ? format_date(*s.last) : ""},
                                       {"valid_rows", s.valid_rows}});
            return j;
        }
    };

    inline IngestSummary summarize(const Dataset &d)
    {
        IngestSummary s;
        s.num_assets = d.raw.num_assets();
        s.rows_raw = d.raw.num_rows();
        s.rows_filtered = d.filtered.num_rows();
        s.rows_train = d.train.num_rows();
        s.rows_test = d.test.num_rows();
        for (std::size_t a = 0; a < d.raw.num_assets(); ++a)
        {
            AssetSpan span{d.raw.assets[a], std::nullopt, std::nullopt, 0};
            for (std::size_t r = 0; r < d.raw.num_rows(); ++r)
            {
                const double v = d.raw.prices(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(a));
                if (std::isfinite(v) && v > 0.0)
                {
                    if (!span.first)
                        span.first = d.raw.dates[r];
                    span.last = d.raw.dates[r];
                    ++span.valid_rows;
                }
            }
            s.spans.push_back(std::move(span));
        }
        return s;
    }

    inline IngestSummary cmd_ingest(const Config &config) { return summarize(load_dataset(config)); }

    // train -----------------------------------------------------------------

    struct EpisodeRecord
    {
        std::size_t episode = 0;
        double epsilon = 0.0;
        std::size_t updates = 0;
        double mean_loss = std::numeric_limits<double>::quiet_NaN(); ///< NaN when no update ran
        std::size_t explored_steps = 0;
        std::size_t steps = 0;
        double final_value = 0.0;
    };

    struct TrainResult
    {
        QNetwork net;
        std::vector<EpisodeRecord> episodes;
        std::size_t total_steps = 0;
        std::optional<std::size_t> first_update_step; ///< 1-based global step of the first replay update
    };

    inline std::vector<std::size_t> network_dims(const Config &config, std::size_t num_assets)
    {
        std::vector<std::size_t> dims{state_length(num_assets)};
        dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
        dims.push_back(num_assets);
        return dims;
    }

    /// SplitMix64 finalizer; derives independent stream seeds from one config seed.
    inline std::uint64_t mix_seed(std::uint64_t x)
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    /**
     * @brief Episode loop on the training table only.
     *
     * Per step: act -> step -> remember -> exp_replay (once the buffer is full).
     * Epsilon decays per episode; the buffer persists across episodes.
     */
    inline TrainResult train_agent(const Config &config, const PriceTable &train)
    {
        const TrendModel trend = TrendModel::fit(train, config.scale_by_first_price);
        Environment env(make_features(train, trend, 0, config.ma_source), config.window, config.regime,
                        config.initial_investment);

        TrainResult result;
        result.net = QNetwork::init(network_dims(config, env.num_assets()), config.rng_seed);
        Rng policy_rng(mix_seed(config.rng_seed));
        ReplayBuffer buffer(config.buffer_capacity);
        const EpsilonSchedule schedule{config.epsilon_start, config.epsilon_decay, config.epsilon_floor};

        result.episodes.reserve(config.episodes);
        for (std::size_t episode = 0; episode < config.episodes; ++episode)
        {
            EpisodeRecord rec;
            rec.episode = episode;
            rec.epsilon = schedule.at(episode);
            double loss_sum = 0.0;
            State state = env.reset();
            bool done = false;
            while (!done)
            {
                ++result.total_steps;
                ++rec.steps;
                try
                {
                    Decision decision = act(result.net, state, rec.epsilon, policy_rng, config.regime);
                    rec.explored_steps += decision.explored ? 1 : 0;
                    auto outcome = env.step(decision.weights);
                    remember(buffer, {state, std::move(decision.weights), outcome.next, std::move(outcome.reward)});
                    if (auto loss = exp_replay(buffer, result.net, config.learning_rate, config.gamma))
                    {
                        loss_sum += *loss;
                        ++rec.updates;
                        if (!result.first_update_step)
                            result.first_update_step = result.total_steps;
                    }
                    state = std::move(outcome.next);
                    done = outcome.done;
                }
                catch (const NumericError &e)
                {
                    throw NumericError("training aborted at episode " + std::to_string(episode) + ", step " +
                                       std::to_string(rec.steps - 1) + ": " + e.what());
                }
            }
            if (rec.updates > 0)
                rec.mean_loss = loss_sum / static_cast<double>(rec.updates);
            rec.final_value = env.portfolio_value();
            result.episodes.push_back(rec);
        }
        return result;
    }

    /// `episode,epsilon,updates,mean_loss,explore_fraction,final_value`
    inline std::string loss_log_csv(const std::vector<EpisodeRecord> &episodes)
    {
        std::ostringstream out;
        out << "episode,epsilon,updates,mean_loss,explore_fraction,final_value\n";
        out << std::setprecision(std::numeric_limits<double>::max_digits10);
        for (const auto &e : episodes)
        {
            out << e.episode << ',' << e.epsilon << ',' << e.updates << ',';
            if (e.updates > 0)
                out << e.mean_loss;
            out << ',' << static_cast<double>(e.explored_steps) / static_cast<double>(e.steps) << ','
                << e.final_value << '\n';
        }
        return out.str();
    }

    struct RunManifest
    {
        std::string command;
        std::string config_hash;
        std::uint64_t rng_seed = 0;
        std::string data_digest;
        DateRange train_range{};
        DateRange test_range{};
        std::map<std::string, std::string> artifacts;
        double duration_seconds = 0.0;

        nlohmann::json to_json() const
        {
            nlohmann::json j;
            j["command"] = command;
            j["config_hash"] = config_hash;
            j["rng_seed"] = rng_seed;
            j["data_digest"] = data_digest;
            j["train_range"] = {{"start", format_date(train_range.start)}, {"end", format_date(train_range.end)}};
            j["test_range"] = {{"start", format_date(test_range.start)}, {"end", format_date(test_range.end)}};
            j["artifacts"] = artifacts;
            j["duration_seconds"] = duration_seconds;
            return j;
        }
    };

    inline RunManifest make_manifest(const std::string &command, const Config &config)
    {
        RunManifest m;
        m.command = command;
        m.config_hash = config_hash(config);
        m.rng_seed = config.rng_seed;
        m.data_digest = config.data.empty() ? std::string{} : file_digest(config.data);
        m.train_range = config.train_range;
        m.test_range = config.test_range;
        return m;
    }

    /// Trains on the training range and writes checkpoint.json, loss.csv and manifest.json into @p out_dir.
    inline RunManifest cmd_train(const Config &config, const fs::path &out_dir)
    {
        const auto started = std::chrono::steady_clock::now();
        const Dataset data = load_dataset(config);
        RunManifest manifest = make_manifest("train", config);
        const TrainResult result = train_agent(config, data.train);

        fs::create_directories(out_dir);
        const auto checkpoint = out_dir / "checkpoint.json";
        save_checkpoint(result.net, checkpoint);
        write_text(out_dir / "loss.csv", loss_log_csv(result.episodes));
        manifest.artifacts["checkpoint"] = checkpoint.string();
        manifest.artifacts["loss_log"] = (out_dir / "loss.csv").string();
        manifest.artifacts["manifest"] = (out_dir / "manifest.json").string();
        manifest.duration_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        write_text(out_dir / "manifest.json", manifest.to_json().dump(2) + "\n");
        return manifest;
    }

    // backtest --------------------------------------------------------------

    enum class Strategy
    {
        Drl,
        MinVariance,
        MaxReturn,
        EqualWeight,
    };

    inline std::string_view to_string(Strategy s)
    {
        switch (s)
        {
        case Strategy::Drl:
            return "drl";
        case Strategy::MinVariance:
            return "min_variance";
        case Strategy::MaxReturn:
            return "max_return";
        case Strategy::EqualWeight:
            return "equal_weight";
        }
        return "unknown";
    }

    inline Strategy parse_strategy(std::string_view s)
    {
        for (auto v : {Strategy::Drl, Strategy::MinVariance, Strategy::MaxReturn, Strategy::EqualWeight})
            if (to_string(v) == s)
                return v;
        throw ConfigError("unknown strategy '" + std::string(s) + "'");
    }

    struct BacktestResult
    {
        Strategy strategy = Strategy::Drl;
        EpisodeLog log;
        std::vector<double> benchmark_returns;
        MetricsReport metrics;
    };

    inline std::string shape_string(const std::vector<std::size_t> &dims)
    {
        std::string s = "[";
        for (std::size_t i = 0; i < dims.size(); ++i)
            s += (i ? "," : "") + std::to_string(dims[i]);
        return s + "]";
    }

    /// Test-range environment whose features use the trend fitted on the training range.
    inline Environment make_test_environment(const Config &config, const Dataset &data, Regime regime)
    {
        const TrendModel trend = TrendModel::fit(data.train, config.scale_by_first_price);
        const auto offset =
            static_cast<std::ptrdiff_t>(data.test_first_row) - static_cast<std::ptrdiff_t>(data.train_first_row);
        return Environment(make_features(data.test, trend, offset, config.ma_source), config.window, regime,
                           config.initial_investment);
    }

    inline WeightVector baseline_weights(Strategy strategy, const Config &config, const Dataset &data)
    {
        switch (strategy)
        {
        case Strategy::MinVariance:
            return min_variance_weights(simple_returns(data.train), config.min_variance_ridge);
        case Strategy::MaxReturn:
            return max_return_weights(simple_returns(data.train));
        case Strategy::EqualWeight:
            return equal_weights(data.train.num_assets());
        case Strategy::Drl:
            break;
        }
        throw std::logic_error("baseline_weights: drl has no fixed weights");
    }

    /**
     * @brief One greedy pass over the test range.
     *
     * DRL acts with epsilon = 0; baselines hold weights estimated on the training range.
     */
    inline BacktestResult run_backtest(const Config &config, const Dataset &data, Strategy strategy,
                                       const QNetwork *net = nullptr)
    {
        std::optional<WeightVector> fixed;
        Regime regime = config.regime;
        if (strategy == Strategy::Drl)
        {
            if (net == nullptr)
                throw ConfigError("drl backtest needs a checkpoint");
            const auto expected = network_dims(config, data.test.num_assets());
            if (net->input_size() != expected.front() || net->output_size() != expected.back())
                throw ConfigError("checkpoint shape " + shape_string(net->dims()) +
                                  " is incompatible with the configured market shape " + shape_string(expected));
        }
        else
        {
            fixed = baseline_weights(strategy, config, data);
            regime = fixed->regime;
        }

        std::optional<std::size_t> bench_asset;
        if (config.benchmark != "equal_weight")
        {
            bench_asset = data.test.asset_index(config.benchmark);
            if (!bench_asset)
                throw ConfigError("benchmark asset '" + config.benchmark + "' is not in the universe");
        }

        Environment env = make_test_environment(config, data, regime);
        BacktestResult result;
        result.strategy = strategy;
        State state = env.reset();
        bool done = false;
        while (!done)
        {
            const WeightVector w = fixed ? *fixed : exploit(*net, state, regime);
            auto outcome = env.step(w);
            const auto &r = outcome.reward.per_asset;
            result.benchmark_returns.push_back(bench_asset ? r[static_cast<Eigen::Index>(*bench_asset)] : r.mean());
            state = std::move(outcome.next);
            done = outcome.done;
        }
        result.log = env.log();
        result.metrics = compute_metrics(result.log.portfolio_returns(), result.benchmark_returns,
                                         config.risk_free_rate, config.initial_investment);
        return result;
    }

    inline void write_backtest(const BacktestResult &r, const fs::path &out_dir)
    {
        const std::string name(to_string(r.strategy));
        std::ostringstream equity;
        r.log.write_csv(equity);
        write_text(out_dir / ("equity_" + name + ".csv"), equity.str());
        write_text(out_dir / ("metrics_" + name + ".json"), to_json(r.metrics).dump(2) + "\n");
    }

    inline BacktestResult cmd_backtest(const Config &config, const std::optional<fs::path> &checkpoint,
                                       const fs::path &out_dir, Strategy strategy = Strategy::Drl)
    {
        const Dataset data = load_dataset(config);
        std::optional<QNetwork> net;
        if (strategy == Strategy::Drl)
        {
            if (!checkpoint)
                throw ConfigError("backtest of drl needs --checkpoint");
            net = load_checkpoint(*checkpoint);
        }
        BacktestResult result = run_backtest(config, data, strategy, net ? &*net : nullptr);
        write_backtest(result, out_dir);
        return result;
    }

    // compare ---------------------------------------------------------------

    inline constexpr Strategy kAllStrategies[] = {Strategy::Drl, Strategy::MinVariance, Strategy::MaxReturn,
                                                  Strategy::EqualWeight};

    /// Evaluates every strategy on the same test range; a failing strategy yields a failed row.
    inline std::vector<ComparisonRow> compare_strategies(const Config &config, const Dataset &data,
                                                         const QNetwork *net, const fs::path *out_dir = nullptr)
    {
        std::vector<ComparisonRow> rows;
        for (Strategy s : kAllStrategies)
        {
            ComparisonRow row{std::string(to_string(s)), std::nullopt, {}};
            try
            {
                BacktestResult r = run_backtest(config, data, s, net);
                if (out_dir)
                    write_backtest(r, *out_dir);
                row.metrics = r.metrics;
            }
            catch (const std::exception &e)
            {
                row.error = e.what();
            }
            rows.push_back(std::move(row));
        }
        return rows;
    }

    inline std::string comparison_csv(const std::vector<ComparisonRow> &rows)
    {
        std::ostringstream out;
        write_comparison_csv(out, rows);
        return out.str();
    }

    /// Writes comparison.csv (plus per-strategy equity/metrics files) into @p out_dir.
    inline std::vector<ComparisonRow> cmd_compare(const Config &config, const std::optional<fs::path> &checkpoint,
                                                  const fs::path &out_dir)
    {
        const Dataset data = load_dataset(config);
        std::optional<QNetwork> net;
        std::string load_error;
        if (checkpoint)
        {
            try
            {
                net = load_checkpoint(*checkpoint);
            }
            catch (const std::exception &e)
            {
                load_error = e.what();
            }
        }
        fs::create_directories(out_dir);
        auto rows = compare_strategies(config, data, net ? &*net : nullptr, &out_dir);
        if (!load_error.empty())
            rows.front().error = load_error;
        write_text(out_dir / "comparison.csv", comparison_csv(rows));
        return rows;
    }

    // synth -----------------------------------------------------------------

    inline PriceTable cmd_synth(const Config &config, const fs::path &out_csv)
    {
        if (!config.synthetic)
            throw ConfigError("config has no 'synthetic' block");
        const auto seed = config.synthetic->seed.value_or(config.rng_seed);
        PriceTable table = generate_synthetic_market(*config.synthetic, seed);
        std::ostringstream out;
        write_price_csv(out, table);
        write_text(out_csv, out.str());
        return table;
    }

} // namespace qalloc
