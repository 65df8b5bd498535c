// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace splatdepth {

enum class ErrorKind {
    InvalidPrimitive,
    DegenerateCovariance,
    BehindCamera,
    DegenerateProjection,
    InvalidArgument,
    Format,
    Data,
    Io,
    State,
    Divergence,
};

const char *toString(ErrorKind kind);

/// Base exception for every failure raised by the library. The kind is what
/// callers (the CLI in particular) switch on.
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string &message)
        : std::runtime_error(message), mKind(kind) {}

    ErrorKind
    kind() const noexcept {
        return mKind;
    }

  private:
    ErrorKind mKind;
};

/// A loader or parser rejected its input. `field` names the offending field
/// or JSON pointer when one exists.
class FormatError : public Error {
  public:
    FormatError(const std::string &message, std::string field = {})
        : Error(ErrorKind::Format, message), mField(std::move(field)) {}

    const std::string &
    field() const noexcept {
        return mField;
    }

  private:
    std::string mField;
};

class DataError : public Error {
  public:
    DataError(const std::string &message, std::size_t index)
        : Error(ErrorKind::Data, message), mIndex(index) {}

    std::size_t
    index() const noexcept {
        return mIndex;
    }

  private:
    std::size_t mIndex;
};

class DivergenceError : public Error {
  public:
    DivergenceError(const std::string &message, int iteration)
        : Error(ErrorKind::Divergence, message), mIteration(iteration) {}

    int
    iteration() const noexcept {
        return mIteration;
    }

  private:
    int mIteration;
};

[[noreturn]] void raise(ErrorKind kind, const std::string &message);

} // namespace splatdepth
