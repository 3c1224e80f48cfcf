#pragma once

#include <stdexcept>
#include <string>

namespace ctnorm {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Wrong tensor/volume/image dimensions.
struct ShapeError : Error {
    using Error::Error;
};

// Argument outside its mathematical domain (e.g. dose fraction <= 0).
struct DomainError : Error {
    using Error::Error;
};

// RoiBox or index outside the owning volume.
struct BoundsError : Error {
    using Error::Error;
};

// Malformed file contents (bad magic, truncation, length mismatch).
struct ParseError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Invalid model / training / manifest configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Output already exists and overwriting was not requested.
struct ExistsError : Error {
    using Error::Error;
};

// Patch rejection-sampling exhausted its attempt budget.
struct SamplingError : Error {
    using Error::Error;
};

// Non-finite loss or gradient during optimization.
struct TrainError : Error {
    using Error::Error;
};

} // namespace ctnorm
