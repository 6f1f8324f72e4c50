#pragma once

#include <stdexcept>
#include <string>

namespace sqdf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An operation was called outside its documented domain.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Malformed input file or serialized value.
class ParseError : public Error {
public:
    using Error::Error;
};

/// A grid or truncation parameter is too coarse for the requested accuracy.
class ResolutionError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw PreconditionError(what);
}

}  // namespace detail
}  // namespace sqdf
