#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <string_view>

#include "qalloc/errors.hpp"

namespace qalloc
{
    enum class Regime
    {
        LongOnly,  ///< w >= 0, sum w = 1
        LongShort, ///< sum |w| = 1 (gross exposure one)
        Budget,    ///< sum w = 1, any sign; used by the unconstrained minimum-variance baseline
    };

    inline std::string_view to_string(Regime r)
    {
        switch (r)
        {
        case Regime::LongOnly:
            return "long_only";
        case Regime::LongShort:
            return "long_short";
        case Regime::Budget:
            return "budget";
        }
        return "unknown";
    }

    inline constexpr double kWeightTolerance = 1e-9;

    /// Per-asset allocation chosen by the agent or a baseline.
    struct WeightVector
    {
        Eigen::VectorXd weights;
        Regime regime = Regime::LongOnly;

        Eigen::Index size() const { return weights.size(); }
        double operator[](Eigen::Index i) const { return weights[i]; }
    };

    /// Empty string when valid, otherwise a description of the violated invariant.
    inline std::string weight_violation(const WeightVector &w, double tol = kWeightTolerance)
    {
        if (w.weights.size() == 0)
            return "empty weight vector";
        if (!w.weights.allFinite())
            return "non-finite weight";
        if (w.regime == Regime::LongOnly)
        {
            if ((w.weights.array() < 0.0).any())
                return "negative weight under long_only";
            if (std::abs(w.weights.sum() - 1.0) > tol)
                return "long_only weights sum to " + std::to_string(w.weights.sum());
        }
        else if (w.regime == Regime::LongShort)
        {
            if (std::abs(w.weights.cwiseAbs().sum() - 1.0) > tol)
                return "long_short gross exposure is " + std::to_string(w.weights.cwiseAbs().sum());
        }
        else if (std::abs(w.weights.sum() - 1.0) > tol)
        {
            return "budget weights sum to " + std::to_string(w.weights.sum());
        }
        return {};
    }

    inline bool is_valid(const WeightVector &w, double tol = kWeightTolerance)
    {
        return weight_violation(w, tol).empty();
    }

} // namespace qalloc
