#pragma once

#include <stdexcept>
#include <string>

namespace seqfuse {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numeric argument outside its documented domain (non-positive size, gamma < 1, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Matrix or sequence shapes do not agree.
class ShapeMismatch : public Error {
public:
    using Error::Error;
};

/// MLP input/output width does not match the data it is applied to.
class WidthMismatch : public Error {
public:
    using Error::Error;
};

/// Predictions and targets have different lengths.
class AlignmentMismatch : public Error {
public:
    using Error::Error;
};

/// A frame lacks the foreground mask required for recall evaluation.
class MissingMask : public Error {
public:
    using Error::Error;
};

/// A region references a frame for which no voxel grid was supplied.
class MissingGrid : public Error {
public:
    using Error::Error;
};

class EmptySequence : public Error {
public:
    using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Configuration file failed to parse or validate.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace seqfuse
