// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#pragma once

#include <evmlens/isa.hpp>
#include <evmlens/lattice.hpp>

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace evmlens {

using RegisterId = std::uint32_t;

/// Single-assignment register `V<id>`.
struct Register
{
    RegisterId id = 0;
    std::uint64_t birth_pc = 0;

    friend bool operator==(const Register&, const Register&) = default;
};

/// `S<depth>`: the depth-th entry of the block's entry stack (0 = top).
struct Placeholder
{
    std::uint32_t depth = 0;

    friend bool operator==(const Placeholder&, const Placeholder&) = default;
};

/// A pushed literal. `source` is the register its CONST op defines.
struct Constant
{
    Word value;
    RegisterId source = 0;

    friend bool operator==(const Constant&, const Constant&) = default;
};

using Operand = std::variant<Register, Placeholder, Constant>;

std::string to_string(const Operand& operand);

/// One register-transfer operation: `Register = rhs` or `Op args`.
struct TIROp
{
    std::uint64_t pc = 0;
    const OpcodeSpec* opcode = nullptr;
    std::optional<Register> lhs;
    std::vector<Operand> args;
    /// Set for the CONST op materialized from a PUSH.
    std::optional<Word> constant;
    /// JUMP/JUMPI only; empty means unresolved or throwing.
    std::set<std::uint64_t> jump_targets;

    bool is_const() const noexcept { return constant.has_value(); }
    /// "CONST" for materialized pushes, the mnemonic otherwise.
    std::string_view name() const noexcept;
};

/// Identity of a block instance; `tag` is non-zero only for clones made by splitting.
struct BlockKey
{
    std::uint64_t pc = 0;
    std::uint32_t tag = 0;

    friend auto operator<=>(const BlockKey&, const BlockKey&) = default;
};

std::string to_string(const BlockKey& key);

struct TIRBlock
{
    std::uint64_t entry_pc = 0;
    std::uint64_t last_pc = 0;
    /// Pc of the instruction after the block, when control can fall through to it.
    std::optional<std::uint64_t> fallthrough_pc;
    bool starts_with_jumpdest = false;
    /// Ends in STOP/RETURN/REVERT/INVALID/SELFDESTRUCT or an undefined byte.
    bool halts = false;

    std::vector<TIROp> ops;
    std::uint32_t entry_stack_arity = 0;
    /// Top-first; below it lie the untouched entry entries S<arity>, S<arity+1>, ...
    std::vector<Operand> exit_stack;
    /// Net stack effect summed over every instruction of the block.
    std::int64_t stack_delta = 0;
    bool stack_overflow = false;

    std::set<BlockKey> successors;
    std::set<BlockKey> predecessors;
    std::optional<std::uint32_t> clone_tag;

    // Constant-propagation state.
    std::vector<LatticeValue> entry_values;
    std::map<RegisterId, LatticeValue> register_values;
    /// Dest operand of the final jump is a constant with no JUMPDEST among its values.
    bool throws_invalid_jump = false;

    BlockKey key() const noexcept { return {entry_pc, clone_tag.value_or(0)}; }

    /// Pc of the first TIR op; the entry pc for blocks that emit no ops.
    std::uint64_t label() const noexcept { return ops.empty() ? entry_pc : ops.front().pc; }

    /// Final JUMP/JUMPI op, if any.
    const TIROp* jump() const noexcept;
    TIROp* jump() noexcept;

    LatticeValue value_of(const Operand& operand) const;

    /// Value the block leaves at stack depth `depth` on exit.
    LatticeValue exit_value(std::uint32_t depth) const;
};

class RegisterAllocator
{
public:
    Register fresh(std::uint64_t pc) { return {next_++, pc}; }
    RegisterId peek() const noexcept { return next_; }

private:
    RegisterId next_ = 0;
};

inline constexpr std::size_t max_stack_depth = 1024;

/// De-stackifies one basic block against a placeholder-initialized symbolic stack.
TIRBlock symbolic_exec_block(std::span<const Instruction> instrs, RegisterAllocator& registers);

/// Abstract evaluation of a value-producing op over constant sets.
LatticeValue evaluate_op(const OpcodeSpec& opcode, std::span<const LatticeValue> args,
                         std::size_t cap);

}  // namespace evmlens
