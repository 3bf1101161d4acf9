#pragma once

#include <stdexcept>
#include <string>

namespace mfusion {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor/operation shape mismatches. Messages name both shapes involved.
struct ShapeError : Error {
    using Error::Error;
};

// Domain invariant violations on input data (bad class id, lane position
// exceeding lane count, wrong stream length, bad config values).
struct ValidationError : Error {
    using Error::Error;
};

// Numerical failures: NaN loss, non-normalized probability vectors.
struct NumericError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct GeometryError : Error {
    using Error::Error;
};

struct DatasetError : Error {
    using Error::Error;
};

}  // namespace mfusion
