#pragma once

#include <stdexcept>
#include <string>

namespace qvfv {

// Root of every error raised by the library. `kind()` is a stable,
// machine-readable tag used by the CLI error objects.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class UnphysicalState : public Error {
public:
    explicit UnphysicalState(const std::string& what) : Error("UnphysicalState", what) {}
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& what) : Error("InvalidArgument", what) {}
};

class NonSpanningBases : public Error {
public:
    explicit NonSpanningBases(const std::string& what) : Error("NonSpanningBases", what) {}
};

class MissingEstimator : public Error {
public:
    explicit MissingEstimator(const std::string& what) : Error("MissingEstimator", what) {}
};

class EmptyScan : public Error {
public:
    explicit EmptyScan(const std::string& what) : Error("EmptyScan", what) {}
};

class SchemaError : public Error {
public:
    SchemaError(const std::string& what, long index = -1)
        : Error("SchemaError", what), index_(index) {}

    // Index of the first offending record, or -1 when not record-specific.
    long index() const noexcept { return index_; }

private:
    long index_;
};

} // namespace qvfv
