#pragma once
#include <stdexcept>
#include <string>

namespace gsgvb {

// Iterative solver failed to reach its tolerance.
struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values or a numerically invalid state (e.g. a factorization failure).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace gsgvb
