#pragma once
// common.hpp - shared error types and small helpers

#include <stdexcept>
#include <string>

namespace uct {

// Error taxonomy mapped onto CLI exit codes by tools/uct.cpp:
//   InvalidArgument/ShapeError -> 2, IoError -> 3, NumericError -> 4.
struct InvalidArgument : std::runtime_error {
    explicit InvalidArgument(const std::string& msg) : std::runtime_error(msg) {}
};
struct ShapeError : InvalidArgument {
    explicit ShapeError(const std::string& msg) : InvalidArgument(msg) {}
};
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};
struct UndefinedError : std::runtime_error {
    explicit UndefinedError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace uct
