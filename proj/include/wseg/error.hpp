#pragma once

#include <stdexcept>
#include <string>

namespace wseg {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape/axis disagreements between tensors or between a tensor and an op contract.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Caller passed a value outside the documented domain (empty dataset, bad factor, ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Invalid model or run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// API misuse, e.g. replaying a consumed gradient tape.
class UsageError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Malformed serialized data (images, checkpoints).
class FormatError : public Error {
public:
    using Error::Error;
};

class BadMagicError : public FormatError {
public:
    using FormatError::FormatError;
};

class BadVersionError : public FormatError {
public:
    using FormatError::FormatError;
};

class TruncatedFileError : public FormatError {
public:
    using FormatError::FormatError;
};

class ConfigMismatchError : public FormatError {
public:
    using FormatError::FormatError;
};

}  // namespace wseg
