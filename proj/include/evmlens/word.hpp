// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evmlens {

/// 256-bit EVM word. Arithmetic wraps modulo 2^256.
using Word = boost::multiprecision::uint256_t;

using Bytes = std::vector<std::uint8_t>;

/// Canonical "0x"-prefixed lowercase hex with leading zeros stripped ("0x0" for zero).
std::string to_hex(const Word& w);

/// Same canonical form for program counters.
std::string pc_hex(std::uint64_t pc);

/// Big-endian decode of up to 32 bytes.
Word word_from_bytes(std::span<const std::uint8_t> bytes);

/// Big-endian encode into exactly `width` bytes (truncating high bytes).
Bytes word_to_bytes(const Word& w, std::size_t width);

/// Parses "0x..." (or bare) hex into a word; throws MalformedInput.
Word word_from_hex(std::string_view text);

}  // namespace evmlens
