#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qalloc/date.hpp"
#include "qalloc/errors.hpp"
#include "qalloc/weights.hpp"

namespace qalloc
{
    using json = nlohmann::json;

    enum class MovingAverageSource
    {
        Detrended,
        Raw, ///< scaled prices without trend removal
    };

    struct SyntheticAsset
    {
        std::string name;
        double drift = 0.0;       ///< daily drift of the geometric walk
        double vol = 0.01;        ///< daily volatility
        double start_price = 100.0;
    };

    /// Geometric random-walk market description used by the `synth` verb.
    struct SyntheticMarketSpec
    {
        std::vector<SyntheticAsset> assets;
        std::size_t days = 300;
        Date start_date{std::chrono::year{2015}, std::chrono::January, std::chrono::day{1}};
        std::optional<std::uint64_t> seed;
        /// Either a single pairwise correlation or a full N x N matrix (row-major).
        std::vector<double> correlation{0.0};
    };

    /// Every tunable of a run. Defaults reproduce the published setup where it is pinned.
    struct Config
    {
        std::string data;                              ///< price CSV path
        std::optional<std::vector<std::string>> assets; ///< column filter
        std::size_t window = 10;
        std::size_t buffer_capacity = 32;
        std::size_t episodes = 1000;
        double epsilon_start = 1.0;
        double epsilon_decay = 0.995;
        double epsilon_floor = 0.01;
        double learning_rate = 1e-3;
        std::vector<std::size_t> hidden_dims{128, 64};
        double gamma = 0.0;
        Regime regime = Regime::LongOnly;
        std::uint64_t rng_seed = 0;
        DateRange train_range{};
        DateRange test_range{};
        std::string benchmark = "equal_weight";
        double risk_free_rate = 0.0;
        double initial_investment = 1.0;
        double min_variance_ridge = 1e-8;
        MovingAverageSource ma_source = MovingAverageSource::Detrended;
        bool scale_by_first_price = true;
        std::optional<SyntheticMarketSpec> synthetic;

        /// Throws ConfigError on the first violated constraint.
        void validate() const
        {
            auto fail = [](const std::string &msg) { throw ConfigError("config: " + msg); };
            if (window < 2)
                fail("window must be >= 2");
            if (buffer_capacity == 0)
                fail("buffer_capacity must be positive");
            if (episodes == 0)
                fail("episodes must be positive");
            if (!(epsilon_floor > 0.0 && epsilon_floor <= epsilon_start && epsilon_start <= 1.0))
                fail("require 0 < epsilon_floor <= epsilon_start <= 1");
            if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0))
                fail("require 0 < epsilon_decay <= 1");
            if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
                fail("learning_rate must be positive");
            for (auto h : hidden_dims)
                if (h == 0)
                    fail("hidden_dims entries must be positive");
            if (!(gamma >= 0.0 && gamma < 1.0))
                fail("gamma must be in [0, 1)");
            if (!(initial_investment > 0.0))
                fail("initial_investment must be positive");
            if (!(min_variance_ridge >= 0.0))
                fail("min_variance_ridge must be non-negative");
            if (!train_range.start.ok() || !train_range.end.ok() || train_range.end < train_range.start)
                fail("train_range is empty or invalid");
            if (!test_range.start.ok() || !test_range.end.ok() || test_range.end < test_range.start)
                fail("test_range is empty or invalid");
            if (!(train_range.end < test_range.start))
                fail("train_range must end before test_range starts");
            if (benchmark.empty())
                fail("benchmark must be 'equal_weight' or an asset id");
            if (assets && benchmark != "equal_weight" &&
                std::find(assets->begin(), assets->end(), benchmark) == assets->end())
                fail("benchmark asset '" + benchmark + "' is not in the asset filter");
        }

        /// Canonical JSON form; also the input to config_hash().
        json to_json() const
        {
            json j;
            j["data"] = data;
            if (assets)
                j["assets"] = *assets;
            j["window"] = window;
            j["buffer_capacity"] = buffer_capacity;
            j["episodes"] = episodes;
            j["epsilon_start"] = epsilon_start;
            j["epsilon_decay"] = epsilon_decay;
            j["epsilon_floor"] = epsilon_floor;
            j["learning_rate"] = learning_rate;
            j["hidden_dims"] = hidden_dims;
            j["gamma"] = gamma;
            j["regime"] = std::string(to_string(regime));
            j["rng_seed"] = rng_seed;
            j["train_range"] = {{"start", format_date(train_range.start)}, {"end", format_date(train_range.end)}};
            j["test_range"] = {{"start", format_date(test_range.start)}, {"end", format_date(test_range.end)}};
            j["benchmark"] = benchmark;
            j["risk_free_rate"] = risk_free_rate;
            j["initial_investment"] = initial_investment;
            j["min_variance_ridge"] = min_variance_ridge;
            j["ma_source"] = ma_source == MovingAverageSource::Detrended ? "detrended" : "raw";
            j["price_scaling"] = scale_by_first_price ? "first_price" : "none";
            if (synthetic)
            {
                json s;
                s["days"] = synthetic->days;
                s["start_date"] = format_date(synthetic->start_date);
                if (synthetic->seed)
                    s["seed"] = *synthetic->seed;
                if (synthetic->correlation.size() == 1)
                    s["correlation"] = synthetic->correlation.front();
                else
                    s["correlation"] = synthetic->correlation;
                s["assets"] = json::array();
                for (const auto &a : synthetic->assets)
                    s["assets"].push_back(
                        {{"name", a.name}, {"drift", a.drift}, {"vol", a.vol}, {"start_price", a.start_price}});
                j["synthetic"] = std::move(s);
            }
            return j;
        }
    };

    namespace detail
    {
        inline void reject_unknown_keys(const json &j, const std::set<std::string> &known, const std::string &where)
        {
            for (const auto &[key, _] : j.items())
                if (!known.contains(key))
                    throw ConfigError("config: unknown key '" + key + "' in " + where);
        }

        inline Date parse_config_date(const json &j, const std::string &what)
        {
            if (!j.is_string())
                throw ConfigError("config: " + what + " must be a YYYY-MM-DD string");
            auto d = parse_date(j.get<std::string>());
            if (!d)
                throw ConfigError("config: " + what + " is not a valid date");
            return *d;
        }

        inline DateRange parse_range(const json &j, const std::string &what)
        {
            if (!j.is_object())
                throw ConfigError("config: " + what + " must be an object with start/end");
            reject_unknown_keys(j, {"start", "end"}, what);
            if (!j.contains("start") || !j.contains("end"))
                throw ConfigError("config: " + what + " needs both start and end");
            return {parse_config_date(j["start"], what + ".start"), parse_config_date(j["end"], what + ".end")};
        }

        template <class T>
        T get_as(const json &j, const std::string &key)
        {
            try
            {
                if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>)
                {
                    if (!j.is_number_unsigned())
                        throw ConfigError("config: '" + key + "' must be a non-negative integer");
                }
                return j.get<T>();
            }
            catch (const json::exception &e)
            {
                throw ConfigError("config: '" + key + "' has the wrong type (" + e.what() + ")");
            }
        }

        inline SyntheticMarketSpec parse_synthetic(const json &j)
        {
            if (!j.is_object())
                throw ConfigError("config: synthetic must be an object");
            reject_unknown_keys(j, {"assets", "days", "start_date", "seed", "correlation"}, "synthetic");
            SyntheticMarketSpec spec;
            if (j.contains("days"))
                spec.days = get_as<std::size_t>(j["days"], "synthetic.days");
            if (j.contains("start_date"))
                spec.start_date = parse_config_date(j["start_date"], "synthetic.start_date");
            if (j.contains("seed"))
                spec.seed = get_as<std::uint64_t>(j["seed"], "synthetic.seed");
            if (j.contains("correlation"))
            {
                const auto &c = j["correlation"];
                if (c.is_number())
                    spec.correlation = {c.get<double>()};
                else if (c.is_array())
                {
                    spec.correlation.clear();
                    for (const auto &row : c)
                    {
                        if (row.is_array())
                            for (const auto &v : row)
                                spec.correlation.push_back(get_as<double>(v, "synthetic.correlation"));
                        else
                            spec.correlation.push_back(get_as<double>(row, "synthetic.correlation"));
                    }
                }
                else
                    throw ConfigError("config: synthetic.correlation must be a number or matrix");
            }
            if (!j.contains("assets") || !j["assets"].is_array() || j["assets"].empty())
                throw ConfigError("config: synthetic.assets must be a non-empty array");
            for (const auto &a : j["assets"])
            {
                reject_unknown_keys(a, {"name", "drift", "vol", "start_price"}, "synthetic.assets[]");
                SyntheticAsset asset;
                if (!a.contains("name"))
                    throw ConfigError("config: synthetic asset without name");
                asset.name = get_as<std::string>(a["name"], "synthetic.assets[].name");
                if (a.contains("drift"))
                    asset.drift = get_as<double>(a["drift"], "drift");
                if (a.contains("vol"))
                    asset.vol = get_as<double>(a["vol"], "vol");
                if (a.contains("start_price"))
                    asset.start_price = get_as<double>(a["start_price"], "start_price");
                if (!(asset.vol >= 0.0) || !(asset.start_price > 0.0))
                    throw ConfigError("config: synthetic asset '" + asset.name + "' needs vol >= 0, start_price > 0");
                spec.assets.push_back(asset);
            }
            const auto n = spec.assets.size();
            if (spec.correlation.size() != 1 && spec.correlation.size() != n * n)
                throw ConfigError("config: synthetic.correlation must be scalar or " + std::to_string(n) + "x" +
                                  std::to_string(n));
            if (spec.days < 2)
                throw ConfigError("config: synthetic.days must be >= 2");
            return spec;
        }
    } // namespace detail

    /**
     * @brief Builds a Config from JSON. Unknown keys are rejected.
     *
     * A relative `data` path is resolved against @p base_dir.
     */
    inline Config config_from_json(const json &j, const std::filesystem::path &base_dir = {})
    {
        using detail::get_as;
        if (!j.is_object())
            throw ConfigError("config: top level must be a JSON object");
        detail::reject_unknown_keys(j,
                                    {"data", "assets", "window", "buffer_capacity", "episodes", "epsilon_start",
                                     "epsilon_decay", "epsilon_floor", "learning_rate", "hidden_dims", "gamma",
                                     "regime", "rng_seed", "train_range", "test_range", "benchmark",
                                     "risk_free_rate", "initial_investment", "min_variance_ridge", "ma_source",
                                     "price_scaling", "synthetic"},
                                    "top level");
        Config c;
        if (j.contains("data"))
        {
            std::filesystem::path p = get_as<std::string>(j["data"], "data");
            if (p.is_relative() && !base_dir.empty())
                p = base_dir / p;
            c.data = p.string();
        }
        if (j.contains("assets"))
            c.assets = get_as<std::vector<std::string>>(j["assets"], "assets");
        if (j.contains("window"))
            c.window = get_as<std::size_t>(j["window"], "window");
        if (j.contains("buffer_capacity"))
            c.buffer_capacity = get_as<std::size_t>(j["buffer_capacity"], "buffer_capacity");
        if (j.contains("episodes"))
            c.episodes = get_as<std::size_t>(j["episodes"], "episodes");
        if (j.contains("epsilon_start"))
            c.epsilon_start = get_as<double>(j["epsilon_start"], "epsilon_start");
        if (j.contains("epsilon_decay"))
            c.epsilon_decay = get_as<double>(j["epsilon_decay"], "epsilon_decay");
        if (j.contains("epsilon_floor"))
            c.epsilon_floor = get_as<double>(j["epsilon_floor"], "epsilon_floor");
        if (j.contains("learning_rate"))
            c.learning_rate = get_as<double>(j["learning_rate"], "learning_rate");
        if (j.contains("hidden_dims"))
        {
            if (!j["hidden_dims"].is_array())
                throw ConfigError("config: 'hidden_dims' must be an array");
            c.hidden_dims.clear();
            for (const auto &h : j["hidden_dims"])
                c.hidden_dims.push_back(get_as<std::size_t>(h, "hidden_dims"));
        }
        if (j.contains("gamma"))
            c.gamma = get_as<double>(j["gamma"], "gamma");
        if (j.contains("regime"))
        {
            const auto r = get_as<std::string>(j["regime"], "regime");
            if (r == "long_only")
                c.regime = Regime::LongOnly;
            else if (r == "long_short")
                c.regime = Regime::LongShort;
            else
                throw ConfigError("config: regime must be 'long_only' or 'long_short'");
        }
        if (j.contains("rng_seed"))
            c.rng_seed = get_as<std::uint64_t>(j["rng_seed"], "rng_seed");
        if (!j.contains("train_range") || !j.contains("test_range"))
            throw ConfigError("config: train_range and test_range are required");
        c.train_range = detail::parse_range(j["train_range"], "train_range");
        c.test_range = detail::parse_range(j["test_range"], "test_range");
        if (j.contains("benchmark"))
            c.benchmark = get_as<std::string>(j["benchmark"], "benchmark");
        if (j.contains("risk_free_rate"))
            c.risk_free_rate = get_as<double>(j["risk_free_rate"], "risk_free_rate");
        if (j.contains("initial_investment"))
            c.initial_investment = get_as<double>(j["initial_investment"], "initial_investment");
        if (j.contains("min_variance_ridge"))
            c.min_variance_ridge = get_as<double>(j["min_variance_ridge"], "min_variance_ridge");
        if (j.contains("ma_source"))
        {
            const auto s = get_as<std::string>(j["ma_source"], "ma_source");
            if (s == "detrended")
                c.ma_source = MovingAverageSource::Detrended;
            else if (s == "raw")
                c.ma_source = MovingAverageSource::Raw;
            else
                throw ConfigError("config: ma_source must be 'detrended' or 'raw'");
        }
        if (j.contains("price_scaling"))
        {
            const auto s = get_as<std::string>(j["price_scaling"], "price_scaling");
            if (s == "first_price")
                c.scale_by_first_price = true;
            else if (s == "none")
                c.scale_by_first_price = false;
            else
                throw ConfigError("config: price_scaling must be 'first_price' or 'none'");
        }
        if (j.contains("synthetic"))
            c.synthetic = detail::parse_synthetic(j["synthetic"]);
        c.validate();
        return c;
    }

    inline Config load_config(const std::filesystem::path &path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot open config file '" + path.string() + "'");
        json j;
        try
        {
            in >> j;
        }
        catch (const json::parse_error &e)
        {
            throw ConfigError("config: invalid JSON: " + std::string(e.what()));
        }
        return config_from_json(j, path.parent_path());
    }

    /// 64-bit FNV-1a.
    inline std::uint64_t fnv1a64(std::string_view bytes)
    {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : bytes)
        {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    inline std::string hex64(std::uint64_t v)
    {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
        return buf;
    }

    inline std::string config_hash(const Config &c) { return hex64(fnv1a64(c.to_json().dump())); }

} // namespace qalloc
