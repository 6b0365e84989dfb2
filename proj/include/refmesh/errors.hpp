#pragma once

#include <stdexcept>
#include <string>

namespace refmesh {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// File could not be read or written.
struct IoError : Error {
    using Error::Error;
};

// File content does not conform to the declared format.
struct ParseError : Error {
    using Error::Error;
};

struct EmptyMesh : Error {
    using Error::Error;
};

struct NotWatertight : Error {
    using Error::Error;
};

struct DegenerateExtent : Error {
    using Error::Error;
};

struct GridMismatch : Error {
    using Error::Error;
};

struct TooManyCenters : Error {
    using Error::Error;
};

struct EmptyVolume : Error {
    using Error::Error;
};

struct EmptyRange : Error {
    using Error::Error;
};

struct DegenerateConfiguration : Error {
    using Error::Error;
};

struct SingularSystem : Error {
    using Error::Error;
};

struct EmptyField : Error {
    using Error::Error;
};

struct SolverSingular : Error {
    using Error::Error;
};

struct InsufficientMatches : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct StageError : Error {
    using Error::Error;
};

}  // namespace refmesh
