#pragma once

#include <stdexcept>
#include <string>

namespace hdcg {

/// Invalid configuration or parameters. CLI exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Unreadable, malformed or inconsistent data. CLI exit code 3.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public DataError {
public:
    using DataError::DataError;
};

class FormatError : public DataError {
public:
    using DataError::DataError;
};

class ShapeError : public DataError {
public:
    using DataError::DataError;
};

/// Mask extraction found no usable contour; the image is excluded from aggregates.
class MaskExtractionError : public DataError {
public:
    using DataError::DataError;
};

/// Skeletonization did not find two sufficiently long curves.
class InsufficientStructureError : public DataError {
public:
    using DataError::DataError;
};

/// Failure while running a computation (non-finite loss, etc.). CLI exit code 4.
class ComputeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingError : public ComputeError {
public:
    TrainingError(const std::string& what, std::string diagnostic)
        : ComputeError(what), diagnostic_(std::move(diagnostic)) {}

    const std::string& diagnostic() const noexcept { return diagnostic_; }

private:
    std::string diagnostic_;
};

}  // namespace hdcg
