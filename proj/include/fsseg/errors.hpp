#pragma once

#include <stdexcept>
#include <string>

namespace fsseg {

// Base class of every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file: corpus, dictionary, model, config or ratings.
struct ParseError : Error {
  using Error::Error;
};

// Violated data-model invariant or incompatible shapes.
struct DataError : Error {
  using Error::Error;
};

// Invalid run configuration (unknown key, bad fold count, ...).
struct ConfigError : Error {
  using Error::Error;
};

// Non-finite objective values or a failed line search.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace fsseg
