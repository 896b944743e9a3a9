#ifndef BLEV_ERRORS_HPP
#define BLEV_ERRORS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace blev {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid model construction (violated type invariant).
struct ModelError : Error {
    using Error::Error;
};

// Argument outside the finiteness domain of a spectral function.
struct DomainError : Error {
    using Error::Error;
};

// A moment / integrability condition required by the operation fails.
// The message cites the failing clause.
struct ConditionError : Error {
    using Error::Error;
};

struct UnsupportedCondition : Error {
    using Error::Error;
};

// Live-particle count exceeded the configured cap.
struct ExplosionError : Error {
    ExplosionError(const std::string& msg, std::uint64_t replica)
        : Error(msg), replica_index(replica) {}
    std::uint64_t replica_index = 0;
};

struct DegenerateInput : Error {
    using Error::Error;
};

// Post-extinction filtering left too few replicas.
struct InsufficientSamples : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

} // namespace blev

#endif
