#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace qalloc
{
    /**
     * @brief Seeded random source with platform-independent conversions.
     *
     * The engine is std::mt19937_64, whose output sequence is fixed by the
     * standard. Conversions to reals are done here rather than through
     * <random> distributions, which are implementation-defined.
     */
    class Rng
    {
    public:
        explicit Rng(std::uint64_t seed) : engine_(seed) {}

        std::uint64_t next_u64() { return engine_(); }

        /// Uniform on [0, 1) with 53 random bits.
        double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

        /// Uniform on [lo, hi).
        double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

        /// Consumes exactly one engine value.
        bool bernoulli(double p) { return uniform01() < p; }

        /// Standard normal via Box-Muller; consumes exactly two engine values.
        double normal()
        {
            const double u1 = 1.0 - uniform01(); // (0, 1]
            const double u2 = uniform01();
            return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        }

    private:
        std::mt19937_64 engine_;
    };

} // namespace qalloc
