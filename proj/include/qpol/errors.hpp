// Error taxonomy shared by all modules. The CLI maps these onto exit codes
// (precondition/config -> 2, numerical failure -> 3, verification -> 4).
#pragma once

#include <stdexcept>
#include <string>

namespace qpol {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated contract or malformed input (bad config, grid mismatch, ...).
struct PreconditionError : Error {
    explicit PreconditionError(const std::string& msg) : Error(msg) {}
};

// The algorithm ran but failed numerically (stagnation, divergence,
// ill-conditioning, norm drift).
struct NumericalError : Error {
    explicit NumericalError(const std::string& msg) : Error(msg) {}
};

// A result was produced but its independent re-check failed.
struct VerificationError : Error {
    explicit VerificationError(const std::string& msg) : Error(msg) {}
};

}  // namespace qpol
