#pragma once

#include <stdexcept>
#include <string>

namespace nmcool {

/// Input violates a documented precondition (bad dimension, negative rate, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure inside a solver: step-size underflow, trace drift,
/// singular constrained system, invalid resulting state.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IntegrationError : public SolverError {
public:
    IntegrationError(const std::string& what, double time_reached)
        : SolverError(what), time_reached_(time_reached) {}
    double time_reached() const noexcept { return time_reached_; }

private:
    double time_reached_;
};

class NonUniqueSteadyState : public SolverError {
public:
    using SolverError::SolverError;
};

/// A denominator of the sum-over-states response came within tolerance of zero.
class ResonanceError : public DomainError {
public:
    ResonanceError(const std::string& what, int m, int n, int l)
        : DomainError(what), m_(m), n_(n), l_(l) {}
    int m() const noexcept { return m_; }
    int n() const noexcept { return n_; }
    int l() const noexcept { return l_; }

private:
    int m_, n_, l_;
};

}  // namespace nmcool
