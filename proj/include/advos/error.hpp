#pragma once

#include <stdexcept>
#include <string>

namespace advos {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration (shapes, ranges, unknown keys).
struct ConfigError : Error {
    using Error::Error;
};

// A caller violated an API precondition (internal misuse, not user input).
struct ContractError : Error {
    using Error::Error;
};

// NaN/Inf surfaced where finite values are required.
struct NumericError : Error {
    using Error::Error;
};

// File ingestion problems; message names row/column where possible.
struct IngestError : Error {
    using Error::Error;
};

struct ImputeError : Error {
    using Error::Error;
};

struct SplitError : Error {
    using Error::Error;
};

struct MetricError : Error {
    using Error::Error;
};

// An op on the requested differentiation path has no second-order rule.
struct UnsupportedOpError : Error {
    using Error::Error;
};

// Raised when a resampler cannot run on a dataset (Table-style "NA" cells).
struct NotApplicableError : Error {
    using Error::Error;
};

// Training aborted; message carries epoch/player/loss diagnostics.
struct TrainError : Error {
    using Error::Error;
};

}  // namespace advos
