#pragma once

#include <stdexcept>
#include <string>

namespace acdn {

// Malformed or inconsistent input data. Maps to CLI exit status 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A broken internal invariant. Maps to CLI exit status 3.
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace acdn
