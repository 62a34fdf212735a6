#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nonstop {

/// Arguments violate a documented precondition (bad shape, out-of-domain value).
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Not enough past observations to evaluate a transform or a prediction.
class InsufficientHistory : public std::runtime_error {
public:
    InsufficientHistory(const std::string& what, std::size_t have, std::size_t need)
        : std::runtime_error(what + " (have " + std::to_string(have) + ", need " +
                             std::to_string(need) + ")"),
          have_(have),
          need_(need) {}

    std::size_t have() const noexcept { return have_; }
    std::size_t need() const noexcept { return need_; }

private:
    std::size_t have_;
    std::size_t need_;
};

/// An iterative kernel hit its iteration cap.
class NumericFailure : public std::runtime_error {
public:
    NumericFailure(const std::string& what, std::size_t iterations)
        : std::runtime_error(what + " after " + std::to_string(iterations) + " iterations"),
          iterations_(iterations) {}

    std::size_t iterations() const noexcept { return iterations_; }

private:
    std::size_t iterations_;
};

}  // namespace nonstop
