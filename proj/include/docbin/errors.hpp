#pragma once

#include <stdexcept>
#include <string>

namespace docbin {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// File was readable but its encoding is not supported.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A caller passed an out-of-contract argument.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Dataset content is inconsistent (orphans, size mismatches, nothing usable).
class DataError : public Error {
public:
    using Error::Error;
};

/// Configuration is invalid or incompatible with a checkpoint.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite value.
class TrainingFault : public Error {
public:
    using Error::Error;
};

/// Checkpoint bytes failed validation.
class IntegrityError : public Error {
public:
    using Error::Error;
};

/// A metric is undefined for the given input (e.g. DRD without non-uniform blocks).
class UndefinedMetric : public Error {
public:
    using Error::Error;
};

}  // namespace docbin
