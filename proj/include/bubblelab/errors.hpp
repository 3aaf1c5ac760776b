#pragma once

#include <stdexcept>
#include <string>

namespace bubblelab {

// Bad or inconsistent configuration. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A market or accounting invariant broke mid-simulation. Exit code 3.
class InvariantViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Model endpoint still failing after all retries. Exit code 4.
class TransportExhausted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace bubblelab
