// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evmioc
{
/// Base of every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Bad arguments or unknown names supplied by a caller (wrong arity, unknown scenario, ...).
class UsageError : public Error
{
public:
    using Error::Error;
};

/// Invalid investigation or rule configuration (missing params, incompatible modes).
class ConfigError : public Error
{
public:
    using Error::Error;
};

/// A historical state, block or trace that the archive cannot supply.
class ArchiveGapError : public Error
{
public:
    using Error::Error;
};

/// Malformed response received from a remote node.
class ProtocolError : public Error
{
public:
    using Error::Error;
};

class TransferError : public Error
{
public:
    using Error::Error;
};

class RangeError : public Error
{
public:
    using Error::Error;
};

/// Malformed input document. `index()` names the offending record (structLog index or CSV line).
class ParseError : public Error
{
public:
    ParseError(const std::string& what, std::size_t index)
      : Error(what + " (at index " + std::to_string(index) + ")"), index_{index}
    {}
    explicit ParseError(const std::string& what) : Error(what) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_ = 0;
};

class ReconstructionError : public Error
{
public:
    ReconstructionError(const std::string& what, std::size_t step)
      : Error(what + " (at step " + std::to_string(step) + ")"), step_{step}
    {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_ = 0;
};
}  // namespace evmioc
