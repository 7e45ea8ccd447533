#pragma once

#include <stdexcept>

namespace tcwv {

// Base class for all library failures. The three families below map onto
// the command line tool's exit codes, see cli.hpp.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed configuration, missing columns, shape mismatches.
struct schema_error : error {
    using error::error;
};

// Unreadable or unwritable files.
struct io_error : error {
    using error::error;
};

// Degenerate numeric situations: empty inputs, undefined statistics,
// non-finite values where finite ones are required.
struct numeric_error : error {
    using error::error;
};

}  // namespace tcwv
