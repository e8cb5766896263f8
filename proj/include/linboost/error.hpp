#pragma once

#include <stdexcept>
#include <string>

namespace linboost {

/// Malformed or unreadable input data (CSV ingestion, dataset invariants).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed model document or unsupported format version.
class ModelFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical kernel produced something it should never produce (NaN/Inf).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace linboost
