#pragma once

#include <stdexcept>
#include <string>

namespace afcn {

// Base class for every error the library throws. Subclasses mirror the
// failure kinds the module contracts name, so callers and tests can catch
// them selectively.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

// Malformed file contents (WAV, cache, checkpoint).
class FormatError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ManifestError : public Error {
public:
    using Error::Error;
};

class SplitError : public Error {
public:
    using Error::Error;
};

class ImportError : public Error {
public:
    using Error::Error;
};

// Metric requested on an empty confusion matrix.
class MetricError : public Error {
public:
    using Error::Error;
};

// Input shorter than one analysis window; the caller decides policy.
class TooShortError : public Error {
public:
    using Error::Error;
};

// Non-finite parameter detected after an optimizer step.
class NanAbort : public Error {
public:
    NanAbort(std::size_t step, const std::string& where)
        : Error("non-finite parameter after optimizer step " + std::to_string(step) +
                " (" + where + ")"),
          step_(step) {}

    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

} // namespace afcn
