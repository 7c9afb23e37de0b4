#pragma once

#include <stdexcept>
#include <string>

namespace hsk {

/// Bad input: violated precondition, schema error, arity mismatch.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The numerics broke down: overlap after an event, runaway event chains,
/// majorant overflow, hopeless rejection sampling.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace hsk
