#pragma once

#include <stdexcept>
#include <string>

namespace flis {

// Exception taxonomy. The CLI maps these onto exit codes:
// InvalidArgument/DegenerateClass/InputError -> 2, FormatError family -> 3,
// anything else -> 1.

class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SingularMatrix : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotPsd : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Sparse code sums to zero, so the class likelihoods are undefined.
class UndecidablePixel : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dice of two empty sets.
class UndefinedMetric : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class DegenerateClass : public std::runtime_error {
public:
    DegenerateClass(int partition, int cls, const std::string& what)
        : std::runtime_error(what), partition_(partition), class_(cls) {}
    int partition() const noexcept { return partition_; }
    int class_index() const noexcept { return class_; }

private:
    int partition_;
    int class_;
};

// Missing or unreadable input files.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BadMagic : public FormatError {
public:
    using FormatError::FormatError;
};

class VersionMismatch : public FormatError {
public:
    using FormatError::FormatError;
};

class Truncated : public FormatError {
public:
    // partition < 0 means the header was cut short.
    Truncated(int partition, const std::string& what) : FormatError(what), partition_(partition) {}
    int partition() const noexcept { return partition_; }

private:
    int partition_;
};

} // namespace flis
