#pragma once

#include <stdexcept>
#include <string>

namespace pottsvb {

/// Numerical failure (non-finite values, non-SPD matrices, ...).
class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File format or filesystem failure.
class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace pottsvb
