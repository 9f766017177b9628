// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#pragma once

#include <cstddef>
#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>

namespace evmlens {

/// Input text or bytes could not be decoded.
class MalformedInput : public std::runtime_error
{
public:
    MalformedInput(const std::string& what, std::size_t offset)
      : std::runtime_error(what), offset_(offset)
    {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// A wall-clock deadline passed before the work finished.
class Timeout : public std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// Absolute wall-clock limit; unset means unbounded.
using Deadline = std::optional<std::chrono::steady_clock::time_point>;

/// The decompiler reached an internally inconsistent state.
class DecompilationError : public std::runtime_error
{
    using std::runtime_error::runtime_error;
};

}  // namespace evmlens
