#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdenmpc {

using Vec = std::vector<double>;
using VecView = std::span<const double>;
using VecSpan = std::span<double>;

/// Raised when a log-barrier argument or another domain restriction is violated.
class DomainError : public std::runtime_error {
public:
    DomainError(const std::string& what, std::size_t index)
        : std::runtime_error(what), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Raised when a (block) diagonal that must be inverted is singular.
class SingularError : public std::runtime_error {
public:
    SingularError(const std::string& what, std::size_t index)
        : std::runtime_error(what), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Invalid construction arguments (grid, model, problem, config).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline double inf_norm(VecView v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double dot(VecView a, VecView b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(VecView v) { return std::sqrt(dot(v, v)); }

inline void fill_zero(VecSpan v) { std::fill(v.begin(), v.end(), 0.0); }

}  // namespace pdenmpc
