// qalloc command-line driver: ingest | train | backtest | compare | synth

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "qalloc/qalloc.hpp"

namespace fs = std::filesystem;

namespace
{
    enum ExitCode : int
    {
        kOk = 0,
        kFailure = 1,
        kConfigError = 2,
        kDataError = 3,
        kNumericAbort = 4,
    };

    struct Options
    {
        std::string config;
        std::string checkpoint;
        std::string out;
        std::optional<std::uint64_t> seed;
        std::string strategy = "drl";
    };

    qalloc::Config load(const Options &opt)
    {
        qalloc::Config config = qalloc::load_config(opt.config);
        if (opt.seed)
        {
            config.rng_seed = *opt.seed;
            if (config.synthetic)
                config.synthetic->seed = *opt.seed;
        }
        return config;
    }

    fs::path out_dir(const Options &opt) { return opt.out.empty() ? fs::path("qalloc_out") : fs::path(opt.out); }

    std::optional<fs::path> checkpoint_path(const Options &opt)
    {
        if (!opt.checkpoint.empty())
            return fs::path(opt.checkpoint);
        const auto fallback = out_dir(opt) / "checkpoint.json";
        if (fs::exists(fallback))
            return fallback;
        return std::nullopt;
    }

    int run(const std::string &verb, const Options &opt)
    {
        const qalloc::Config config = load(opt);
        if (verb == "ingest")
        {
            const auto summary = qalloc::cmd_ingest(config);
            const auto text = summary.to_json().dump(2);
            if (!opt.out.empty())
                qalloc::write_text(out_dir(opt) / "ingest.json", text + "\n");
            std::cout << text << '\n';
        }
        else if (verb == "train")
        {
            const auto manifest = qalloc::cmd_train(config, out_dir(opt));
            std::cout << manifest.to_json().dump(2) << '\n';
        }
        else if (verb == "backtest")
        {
            const auto strategy = qalloc::parse_strategy(opt.strategy);
            const auto result = qalloc::cmd_backtest(config, checkpoint_path(opt), out_dir(opt), strategy);
            std::cout << qalloc::to_json(result.metrics).dump(2) << '\n';
        }
        else if (verb == "compare")
        {
            const auto rows = qalloc::cmd_compare(config, checkpoint_path(opt), out_dir(opt));
            std::cout << qalloc::comparison_csv(rows);
            for (const auto &row : rows)
                if (!row.metrics)
                    std::cerr << "strategy " << row.strategy << " failed: " << row.error << '\n';
        }
        else if (verb == "synth")
        {
            fs::path target = opt.out.empty() ? fs::path(config.data) : out_dir(opt) / "prices.csv";
            if (target.empty())
                throw qalloc::ConfigError("synth needs --out or a 'data' path in the config");
            const auto table = qalloc::cmd_synth(config, target);
            std::cout << "wrote " << table.num_rows() << " rows x " << table.num_assets() << " assets to "
                      << target.string() << '\n';
        }
        return kOk;
    }
} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Deep Q-learning portfolio allocation backtester"};
    app.require_subcommand(1, 1);

    Options opt;
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App *sub) {
        sub->add_option("--config", opt.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out, "output directory");
        sub->add_option("--seed", seed, "override rng_seed");
    };

    auto *ingest = app.add_subcommand("ingest", "load and validate the price file, print a summary");
    auto *train = app.add_subcommand("train", "train the Q-network on the training range");
    auto *backtest = app.add_subcommand("backtest", "greedy evaluation on the test range");
    auto *compare = app.add_subcommand("compare", "evaluate DRL and the baselines on the test range");
    auto *synth = app.add_subcommand("synth", "generate a synthetic geometric random-walk market");
    for (auto *sub : {ingest, train, backtest, compare, synth})
        add_common(sub);
    for (auto *sub : {backtest, compare})
        sub->add_option("--checkpoint", opt.checkpoint, "trained network (default <out>/checkpoint.json)");
    backtest->add_option("--strategy", opt.strategy, "drl | min_variance | max_return | equal_weight");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    const auto *sub = app.get_subcommands().front();
    if (sub->count("--seed") > 0)
        opt.seed = seed;

    try
    {
        return run(sub->get_name(), opt);
    }
    catch (const qalloc::ConfigError &e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    catch (const qalloc::DataError &e)
    {
        std::cerr << "data error: " << e.what() << '\n';
        return kDataError;
    }
    catch (const qalloc::NumericError &e)
    {
        std::cerr << "numeric abort: " << e.what() << '\n';
        return kNumericAbort;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
}
