// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#pragma once

#include <evmlens/word.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evmlens {

enum class SideEffect : std::uint8_t
{
    none,
    memory_write,
    storage_write,
    call,
    log,
    create,
    destroy,
};

struct OpcodeSpec
{
    std::string_view mnemonic;
    std::uint8_t byte_value = 0;
    std::uint8_t pops = 0;
    std::uint8_t pushes = 0;
    std::uint8_t operand_len = 0;
    bool halts = false;
    bool alters_flow = false;
    SideEffect side_effect = SideEffect::none;

    bool is_push() const noexcept { return operand_len > 0; }
    bool is_dup() const noexcept { return byte_value >= 0x80 && byte_value <= 0x8f; }
    bool is_swap() const noexcept { return byte_value >= 0x90 && byte_value <= 0x9f; }
    bool is_pop() const noexcept { return byte_value == 0x50; }
    bool is_jumpdest() const noexcept { return byte_value == 0x5b; }
    bool is_jump() const noexcept { return byte_value == 0x56; }
    bool is_jumpi() const noexcept { return byte_value == 0x57; }

    /// PUSH/POP/DUP/SWAP: handled entirely by the symbolic stack.
    bool is_stack_shuffle() const noexcept { return is_push() || is_pop() || is_dup() || is_swap(); }
};

/// Data-driven opcode table. Adding an instruction is one `declare` call.
class OpcodeTable
{
public:
    /// The EVM instruction set up to and including Byzantium.
    static const OpcodeTable& standard();

    void declare(const OpcodeSpec& spec);

    /// nullptr for undefined bytes.
    const OpcodeSpec* lookup(std::uint8_t byte) const noexcept;
    const OpcodeSpec* lookup(std::string_view mnemonic) const noexcept;

    /// Synthetic halting opcode used for undefined bytes (byte 0xfe).
    const OpcodeSpec& invalid() const noexcept;

    std::span<const OpcodeSpec> all() const noexcept { return {specs_.data(), specs_.size()}; }

private:
    std::vector<OpcodeSpec> specs_;
    std::array<int, 256> by_byte_ = make_empty_index();

    static std::array<int, 256> make_empty_index()
    {
        std::array<int, 256> a{};
        a.fill(-1);
        return a;
    }
};

struct Instruction
{
    std::uint64_t pc = 0;
    const OpcodeSpec* opcode = nullptr;
    std::optional<Word> operand;
    /// Raw byte when the byte has no defined opcode.
    std::uint8_t raw = 0;
    bool is_invalid = false;

    std::uint64_t size() const noexcept { return 1 + opcode->operand_len; }
    std::uint64_t next_pc() const noexcept { return pc + size(); }
};

struct DisassemblyListing
{
    std::vector<Instruction> instructions;
    std::set<std::uint64_t> block_starts;
    /// A trailing PUSH ran past the end of the code and was zero-padded.
    bool truncated_tail = false;

    /// Instructions grouped by basic block, in pc order.
    std::vector<std::span<const Instruction>> blocks() const;
};

/// Decodes hex text; accepts an optional "0x" prefix and interspersed whitespace.
Bytes parse_hex(std::string_view text);

DisassemblyListing disassemble(std::span<const std::uint8_t> code,
                               const OpcodeTable& table = OpcodeTable::standard());

/// Text listing, one instruction per line, blank line between basic blocks.
std::string format_listing(const DisassemblyListing& listing);

/// Inverse of disassemble for listings without a truncated tail.
Bytes encode_listing(const DisassemblyListing& listing);

}  // namespace evmlens
