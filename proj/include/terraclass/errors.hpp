#pragma once

#include <stdexcept>
#include <string>

namespace terraclass {

// Malformed or inconsistent input: files, documents, dimensions, bad ids.
class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: covariance not positive definite after maximum
// regularization, non-SPD sampling covariance, and similar.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace terraclass
