#pragma once

#include <stdexcept>
#include <string>

namespace hl {

// Base error for all precondition / convergence failures in the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when an iterative solve exhausts its sweep budget.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& msg, double residual)
        : Error(msg), final_residual(residual) {}
    double final_residual;
};

}  // namespace hl
