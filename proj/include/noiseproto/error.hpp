#pragma once

#include <stdexcept>

namespace noiseproto {

// Invalid user-supplied configuration or parameters. CLI exit code 1.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File and format problems. CLI exit code 2.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values, degenerate prototypes and other numeric failures.
// CLI exit code 3.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Incompatible matrix dimensions.
struct shape_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Violated internal precondition; indicates a caller bug, not bad input.
struct contract_error : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace noiseproto
