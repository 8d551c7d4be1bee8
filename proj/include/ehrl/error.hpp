#pragma once

#include <stdexcept>
#include <string>

namespace ehrl {

// Base for every error the library raises. Categories map onto CLI exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration or input document (bad topology, bad parameters).
class ConfigError : public Error {
public:
    using Error::Error;
};

// File could not be read or written.
class IoError : public Error {
public:
    using Error::Error;
};

// A caller asked the simulator or a model to do something the contract forbids
// (routing to a masked slot, non-neighbor rate lookup, shape mismatch).
class ContractError : public Error {
public:
    using Error::Error;
};

} // namespace ehrl
