// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rfo {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes disagree (batch size, dimension, mask length, ...).
class ShapeError : public Error {
public:
    using Error::Error;
};

/// An argument lies outside the domain of the operation (e.g. score at t > 1 - delta).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A structural invariant was violated, e.g. a negative noise variance.
class InvariantError : public Error {
public:
    using Error::Error;
};

/// A sampler produced a non-finite state or velocity.
class NonFiniteError : public Error {
public:
    NonFiniteError(const std::string& what, std::size_t step)
        : Error(what + " (step " + std::to_string(step) + ")"), m_step(step) {}

    std::size_t step() const noexcept { return m_step; }

private:
    std::size_t m_step;
};

/// Training loss became non-finite.
class TrainingDiverged : public Error {
public:
    TrainingDiverged(const std::string& what, std::size_t step)
        : Error(what + " (step " + std::to_string(step) + ")"), m_step(step) {}

    std::size_t step() const noexcept { return m_step; }

private:
    std::size_t m_step;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace rfo
