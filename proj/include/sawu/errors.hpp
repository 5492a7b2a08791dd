#pragma once

#include <stdexcept>
#include <string>

namespace sawu {

// Shape/dimension mismatch between tensors or between data and config.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Mathematically invalid input (zero vector to SAD, negative sparsity input, ...).
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// File problems: missing file, bad magic, truncated payload, non-finite values.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Misuse of an API contract (even window size, non-scalar grad-check target, ...).
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training aborted; message carries epoch/batch context.
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input data is degenerate for the requested algorithm (e.g. rank-deficient VCA input).
struct DegeneracyError : std::runtime_error {
    explicit DegeneracyError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sawu
