#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qalloc
{
    /// Malformed or inconsistent configuration (CLI exit code 2).
    class ConfigError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Unreadable, malformed or insufficient market data (CLI exit code 3).
    class DataError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Fewer usable rows than the feature window needs.
    class InsufficientHistory : public DataError
    {
    public:
        InsufficientHistory(std::size_t have, std::size_t need)
            : DataError("insufficient history: " + std::to_string(have) + " rows available, " +
                        std::to_string(need) + " required"),
              have_(have), need_(need)
        {
        }

        std::size_t have() const noexcept { return have_; }
        std::size_t need() const noexcept { return need_; }

    private:
        std::size_t have_;
        std::size_t need_;
    };

    /// Numerical breakdown during training (CLI exit code 4).
    class NumericError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Loss became NaN/Inf; carries the first offending sample row of the batch.
    class NonFiniteLoss : public NumericError
    {
    public:
        explicit NonFiniteLoss(std::size_t batch_row, const std::string &context = {})
            : NumericError("non-finite loss at batch row " + std::to_string(batch_row) +
                           (context.empty() ? std::string{} : " (" + context + ")")),
              batch_row_(batch_row)
        {
        }

        std::size_t batch_row() const noexcept { return batch_row_; }

    private:
        std::size_t batch_row_;
    };

    /// A weight vector that breaks the invariants of its trading regime.
    class InvalidAction : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

} // namespace qalloc
