// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#include <evmlens/isa.hpp>

#include <evmlens/errors.hpp>

#include <algorithm>
#include <cctype>
#include <sstream>

namespace evmlens {

namespace {

using SE = SideEffect;

struct Row
{
    const char* name;
    std::uint8_t byte;
    std::uint8_t pops;
    std::uint8_t pushes;
    bool halts = false;
    bool flow = false;
    SE effect = SE::none;
};

// clang-format off
constexpr Row base_rows[] = {
    {"STOP", 0x00, 0, 0, true},
    {"ADD", 0x01, 2, 1}, {"MUL", 0x02, 2, 1}, {"SUB", 0x03, 2, 1}, {"DIV", 0x04, 2, 1},
    {"SDIV", 0x05, 2, 1}, {"MOD", 0x06, 2, 1}, {"SMOD", 0x07, 2, 1}, {"ADDMOD", 0x08, 3, 1},
    {"MULMOD", 0x09, 3, 1}, {"EXP", 0x0a, 2, 1}, {"SIGNEXTEND", 0x0b, 2, 1},
    {"LT", 0x10, 2, 1}, {"GT", 0x11, 2, 1}, {"SLT", 0x12, 2, 1}, {"SGT", 0x13, 2, 1},
    {"EQ", 0x14, 2, 1}, {"ISZERO", 0x15, 1, 1}, {"AND", 0x16, 2, 1}, {"OR", 0x17, 2, 1},
    {"XOR", 0x18, 2, 1}, {"NOT", 0x19, 1, 1}, {"BYTE", 0x1a, 2, 1},
    {"SHA3", 0x20, 2, 1},
    {"ADDRESS", 0x30, 0, 1}, {"BALANCE", 0x31, 1, 1}, {"ORIGIN", 0x32, 0, 1}, {"CALLER", 0x33, 0, 1},
    {"CALLVALUE", 0x34, 0, 1}, {"CALLDATALOAD", 0x35, 1, 1}, {"CALLDATASIZE", 0x36, 0, 1},
    {"CALLDATACOPY", 0x37, 3, 0, false, false, SE::memory_write}, {"CODESIZE", 0x38, 0, 1},
    {"CODECOPY", 0x39, 3, 0, false, false, SE::memory_write}, {"GASPRICE", 0x3a, 0, 1},
    {"EXTCODESIZE", 0x3b, 1, 1}, {"EXTCODECOPY", 0x3c, 4, 0, false, false, SE::memory_write},
    {"RETURNDATASIZE", 0x3d, 0, 1}, {"RETURNDATACOPY", 0x3e, 3, 0, false, false, SE::memory_write},
    {"BLOCKHASH", 0x40, 1, 1}, {"COINBASE", 0x41, 0, 1}, {"TIMESTAMP", 0x42, 0, 1},
    {"NUMBER", 0x43, 0, 1}, {"DIFFICULTY", 0x44, 0, 1}, {"GASLIMIT", 0x45, 0, 1},
    {"POP", 0x50, 1, 0}, {"MLOAD", 0x51, 1, 1}, {"MSTORE", 0x52, 2, 0, false, false, SE::memory_write},
    {"MSTORE8", 0x53, 2, 0, false, false, SE::memory_write}, {"SLOAD", 0x54, 1, 1},
    {"SSTORE", 0x55, 2, 0, false, false, SE::storage_write},
    {"JUMP", 0x56, 1, 0, false, true}, {"JUMPI", 0x57, 2, 0, false, true},
    {"PC", 0x58, 0, 1}, {"MSIZE", 0x59, 0, 1}, {"GAS", 0x5a, 0, 1}, {"JUMPDEST", 0x5b, 0, 0},
    {"LOG0", 0xa0, 2, 0, false, false, SE::log}, {"LOG1", 0xa1, 3, 0, false, false, SE::log},
    {"LOG2", 0xa2, 4, 0, false, false, SE::log}, {"LOG3", 0xa3, 5, 0, false, false, SE::log},
    {"LOG4", 0xa4, 6, 0, false, false, SE::log},
    {"CREATE", 0xf0, 3, 1, false, false, SE::create}, {"CALL", 0xf1, 7, 1, false, false, SE::call},
    {"CALLCODE", 0xf2, 7, 1, false, false, SE::call}, {"RETURN", 0xf3, 2, 0, true},
    {"DELEGATECALL", 0xf4, 6, 1, false, false, SE::call},
    {"STATICCALL", 0xfa, 6, 1, false, false, SE::call},
    {"REVERT", 0xfd, 2, 0, true}, {"INVALID", 0xfe, 0, 0, true},
    {"SELFDESTRUCT", 0xff, 1, 0, true, false, SE::destroy},
};
// clang-format on

// PUSHn/DUPn/SWAPn mnemonics need static storage for the string_view.
const std::vector<std::string>& generated_names()
{
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (int i = 1; i <= 32; ++i)
            v.push_back("PUSH" + std::to_string(i));
        for (int i = 1; i <= 16; ++i)
            v.push_back("DUP" + std::to_string(i));
        for (int i = 1; i <= 16; ++i)
            v.push_back("SWAP" + std::to_string(i));
        return v;
    }();
    return names;
}

bool is_hex_digit(char c)
{
    return std::isxdigit(static_cast<unsigned char>(c)) != 0;
}

std::uint8_t hex_value(char c)
{
    if (c >= '0' && c <= '9')
        return static_cast<std::uint8_t>(c - '0');
    return static_cast<std::uint8_t>(std::tolower(static_cast<unsigned char>(c)) - 'a' + 10);
}

}  // namespace

const OpcodeTable& OpcodeTable::standard()
{
    static const OpcodeTable table = [] {
        OpcodeTable t;
        for (const auto& r : base_rows)
            t.declare({r.name, r.byte, r.pops, r.pushes, 0, r.halts, r.flow, r.effect});
        const auto& names = generated_names();
        for (int i = 0; i < 32; ++i)
            t.declare({names[i], static_cast<std::uint8_t>(0x60 + i), 0, 1,
                       static_cast<std::uint8_t>(i + 1)});
        // DUPn consumes n and produces n+1; modelled here as the net (n, n+1) counts.
        for (int i = 0; i < 16; ++i)
            t.declare({names[32 + i], static_cast<std::uint8_t>(0x80 + i),
                       static_cast<std::uint8_t>(i + 1), static_cast<std::uint8_t>(i + 2)});
        for (int i = 0; i < 16; ++i)
            t.declare({names[48 + i], static_cast<std::uint8_t>(0x90 + i),
                       static_cast<std::uint8_t>(i + 2), static_cast<std::uint8_t>(i + 2)});
        return t;
    }();
    return table;
}

void OpcodeTable::declare(const OpcodeSpec& spec)
{
    if (by_byte_[spec.byte_value] >= 0)
        throw std::invalid_argument("duplicate opcode byte for " + std::string(spec.mnemonic));
    if (spec.operand_len > 32)
        throw std::invalid_argument("operand length out of range");
    specs_.push_back(spec);
    by_byte_[spec.byte_value] = static_cast<int>(specs_.size() - 1);
}

const OpcodeSpec* OpcodeTable::lookup(std::uint8_t byte) const noexcept
{
    int idx = by_byte_[byte];
    return idx < 0 ? nullptr : &specs_[static_cast<std::size_t>(idx)];
}

const OpcodeSpec* OpcodeTable::lookup(std::string_view mnemonic) const noexcept
{
    auto it = std::find_if(specs_.begin(), specs_.end(),
                           [&](const OpcodeSpec& s) { return s.mnemonic == mnemonic; });
    return it == specs_.end() ? nullptr : &*it;
}

const OpcodeSpec& OpcodeTable::invalid() const noexcept
{
    return *lookup(std::uint8_t{0xfe});
}

std::vector<std::span<const Instruction>> DisassemblyListing::blocks() const
{
    std::vector<std::span<const Instruction>> out;
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= instructions.size(); ++i) {
        if (i == instructions.size() || block_starts.contains(instructions[i].pc)) {
            out.emplace_back(instructions.data() + begin, i - begin);
            begin = i;
        }
    }
    if (instructions.empty())
        out.clear();
    return out;
}

Bytes parse_hex(std::string_view text)
{
    std::size_t start = 0;
    while (start < text.size() && std::isspace(static_cast<unsigned char>(text[start])))
        ++start;
    if (text.substr(start).starts_with("0x") || text.substr(start).starts_with("0X"))
        start += 2;

    Bytes out;
    int pending = -1;
    std::size_t digits = 0;
    for (std::size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c)))
            continue;
        if (!is_hex_digit(c))
            throw MalformedInput("non-hex character '" + std::string(1, c) + "' at offset " +
                                     std::to_string(i),
                                 i);
        ++digits;
        if (pending < 0) {
            pending = hex_value(c);
        } else {
            out.push_back(static_cast<std::uint8_t>((pending << 4) | hex_value(c)));
            pending = -1;
        }
    }
    if (pending >= 0)
        throw MalformedInput("odd number of hex digits (" + std::to_string(digits) + ")",
                             text.size());
    return out;
}

DisassemblyListing disassemble(std::span<const std::uint8_t> code, const OpcodeTable& table)
{
    DisassemblyListing listing;
    bool start_next = true;
    std::uint64_t pc = 0;
    while (pc < code.size()) {
        Instruction ins;
        ins.pc = pc;
        ins.raw = code[pc];
        ins.opcode = table.lookup(code[pc]);
        if (ins.opcode == nullptr) {
            ins.opcode = &table.invalid();
            ins.is_invalid = true;
        }
        if (ins.opcode->is_jumpdest() || start_next)
            listing.block_starts.insert(pc);

        const std::size_t len = ins.opcode->operand_len;
        if (len > 0) {
            const std::size_t avail = std::min<std::size_t>(len, code.size() - pc - 1);
            Bytes operand(len, 0);
            std::copy_n(code.begin() + static_cast<std::ptrdiff_t>(pc + 1), avail,
                        operand.begin());
            ins.operand = word_from_bytes(operand);
            if (avail < len)
                listing.truncated_tail = true;
        }
        start_next = ins.opcode->halts || ins.opcode->alters_flow || ins.is_invalid;
        pc = ins.next_pc();
        listing.instructions.push_back(ins);
    }
    return listing;
}

std::string format_listing(const DisassemblyListing& listing)
{
    std::ostringstream os;
    bool first = true;
    for (const auto& ins : listing.instructions) {
        if (!first && listing.block_starts.contains(ins.pc))
            os << '\n';
        first = false;
        os << pc_hex(ins.pc) << ' ' << ins.opcode->mnemonic;
        if (ins.operand)
            os << ' ' << to_hex(*ins.operand);
        os << '\n';
    }
    return os.str();
}

Bytes encode_listing(const DisassemblyListing& listing)
{
    Bytes out;
    for (const auto& ins : listing.instructions) {
        out.push_back(ins.is_invalid ? ins.raw : ins.opcode->byte_value);
        if (ins.operand) {
            auto bytes = word_to_bytes(*ins.operand, ins.opcode->operand_len);
            out.insert(out.end(), bytes.begin(), bytes.end());
        }
    }
    return out;
}

}  // namespace evmlens
