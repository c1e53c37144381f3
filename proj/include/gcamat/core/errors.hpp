#pragma once

#include <stdexcept>
#include <string>

namespace gcamat {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or size disagreement between operands.
struct DimensionError : Error {
    using Error::Error;
};

// A caller violated an operation precondition.
struct ContractError : Error {
    using Error::Error;
};

// Malformed input data (non-one-hot trimap, bad PNG levels, ...).
struct ValidationError : Error {
    using Error::Error;
};

// Broken internal structure, e.g. a cyclic computation graph.
struct StructureError : Error {
    using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

}  // namespace gcamat
