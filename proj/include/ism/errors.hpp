#pragma once

#include <stdexcept>
#include <string>

namespace ism {

// Shape disagreement between tensors, images, or depth maps.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration value (widths, counts, ranges).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Out-of-domain numeric parameter (beta <= 0, delta <= 0, ...).
struct ParameterError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse: caller broke a documented precondition.
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// NaN/Inf encountered where finite values are required.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed external input (filenames, config files).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Missing or unreadable external resource (images, depth maps, checkpoints).
struct IngestionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ism
