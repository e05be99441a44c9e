#pragma once

#include <stdexcept>

namespace esn {

/// Base class for every failure the library reports.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed inputs: files, dimensions, labels, configuration.
class DataError : public Error {
public:
    using Error::Error;
};

/// Numerical breakdown: non-finite values, failed convergence.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Model file written with an unsupported format version.
class ModelVersionError : public DataError {
public:
    using DataError::DataError;
};

/// Model file is truncated, has a bad magic, or fails its checksum.
class ModelCorruptError : public DataError {
public:
    using DataError::DataError;
};

}  // namespace esn
