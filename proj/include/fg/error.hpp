#pragma once

#include <stdexcept>
#include <string>

namespace fg {

// Contract violation: bad shape, bad argument, invalid state transition.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A model or data file could not be opened or parsed.
class FileError : public Error {
public:
    using Error::Error;
};

// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace fg
