#pragma once

#include <stdexcept>
#include <string>

namespace gptomo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class RankMismatch : public Error {
public:
    using Error::Error;
};

class IncompatibleModels : public Error {
public:
    using Error::Error;
};

class Infeasible : public Error {
public:
    using Error::Error;
};

class DegenerateGeometry : public Error {
public:
    using Error::Error;
};

class FitFailure : public Error {
public:
    using Error::Error;
};

class DegenerateWitness : public Error {
public:
    using Error::Error;
};

/// A solver reached a state its formulation says is impossible.
class InternalError : public Error {
public:
    using Error::Error;
};

}  // namespace gptomo
