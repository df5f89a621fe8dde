#pragma once
#include <stdexcept>
#include <string>

namespace tftmtl {

/// Shape or width mismatch between tensors/layers.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A stated precondition was violated by the caller.
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Invalid configuration or data that fails schema checks.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Checkpoint or other persisted state could not be loaded.
struct LoadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// File or config I/O failure (maps to CLI exit code 2).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or contradictory configuration (maps to CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Metric is mathematically undefined for the given inputs.
struct UndefinedMetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace tftmtl
