// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#include <evmlens/word.hpp>

#include <evmlens/errors.hpp>

#include <sstream>

namespace evmlens {

std::string to_hex(const Word& w)
{
    if (w == 0)
        return "0x0";
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    Word v = w;
    while (v != 0) {
        out.push_back(digits[static_cast<unsigned>(v & 0xf)]);
        v >>= 4;
    }
    out += "x0";
    return {out.rbegin(), out.rend()};
}

std::string pc_hex(std::uint64_t pc)
{
    std::ostringstream os;
    os << "0x" << std::hex << pc;
    return os.str();
}

Word word_from_bytes(std::span<const std::uint8_t> bytes)
{
    Word w = 0;
    for (auto b : bytes) {
        w <<= 8;
        w |= b;
    }
    return w;
}

Bytes word_to_bytes(const Word& w, std::size_t width)
{
    Bytes out(width, 0);
    Word v = w;
    for (std::size_t i = 0; i < width; ++i) {
        out[width - 1 - i] = static_cast<std::uint8_t>(v & 0xff);
        v >>= 8;
    }
    return out;
}

Word word_from_hex(std::string_view text)
{
    if (text.starts_with("0x") || text.starts_with("0X"))
        text.remove_prefix(2);
    if (text.empty() || text.size() > 64)
        throw MalformedInput("invalid hex word '" + std::string(text) + "'", 0);
    Word w = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        unsigned d;
        if (c >= '0' && c <= '9')
            d = c - '0';
        else if (c >= 'a' && c <= 'f')
            d = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F')
            d = c - 'A' + 10;
        else
            throw MalformedInput("non-hex character in word", i);
        w = (w << 4) | d;
    }
    return w;
}

}  // namespace evmlens
