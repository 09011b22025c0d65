#ifndef GRANGER_ERRORS_HPP
#define GRANGER_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace granger {

/// Shape rule violated by an operation (names the primitive and offending shapes).
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// An operation produced a non-finite value, or a gradient went non-finite.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// API misuse: wrong call order, empty split, backward on a non-scalar, ...
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Invalid or incompatible configuration (model/penalty mismatch, bad fields).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Malformed input file; message carries line/column context where known.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Data generation could not satisfy its constraints (e.g. stationarity).
struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Penalty group structure does not match the declared partition.
struct StructureError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Metric undefined for the given labels (single class, no positives).
struct MetricError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

} // namespace granger

#endif
