#pragma once

#include <stdexcept>
#include <string>

namespace trifuse {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or extent mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A brute-force oracle was asked to materialize a tensor above its size cap.
class OracleScaleError : public Error {
public:
    using Error::Error;
};

/// Invalid or inconsistent run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File could not be read or written; message carries the path.
class IoError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// API misuse, e.g. backward without a recorded forward pass.
class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace trifuse
