#pragma once

#include <stdexcept>

namespace hypergrid {

// Maps onto CLI exit codes: config/usage -> 1, I/O -> 2, split -> 3, compare -> 4.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SplitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CompareError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace hypergrid
