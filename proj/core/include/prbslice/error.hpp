#pragma once

#include <stdexcept>
#include <string>

namespace prbslice {

// Value outside the mathematical domain of an operation (bad MCS index, d <= 0, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Malformed or inconsistent configuration / input data.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller broke an interface contract (wrong dimensions, allocation sum != budget).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Training produced a non-finite loss or parameter.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace prbslice
