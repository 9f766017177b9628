// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#include <evmlens/tir.hpp>

#include <evmlens/errors.hpp>

#include <algorithm>
#include <functional>

namespace evmlens {

std::string to_string(const Operand& operand)
{
    return std::visit(
        [](const auto& o) -> std::string {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, Register>)
                return "V" + std::to_string(o.id);
            else if constexpr (std::is_same_v<T, Placeholder>)
                return "S" + std::to_string(o.depth);
            else
                return to_hex(o.value);
        },
        operand);
}

std::string to_string(const BlockKey& key)
{
    auto s = pc_hex(key.pc);
    if (key.tag != 0)
        s += "#" + std::to_string(key.tag);
    return s;
}

std::string_view TIROp::name() const noexcept
{
    return is_const() ? std::string_view{"CONST"} : opcode->mnemonic;
}

const TIROp* TIRBlock::jump() const noexcept
{
    if (ops.empty() || !ops.back().opcode->alters_flow)
        return nullptr;
    return &ops.back();
}

TIROp* TIRBlock::jump() noexcept
{
    return const_cast<TIROp*>(std::as_const(*this).jump());
}

LatticeValue TIRBlock::value_of(const Operand& operand) const
{
    if (const auto* c = std::get_if<Constant>(&operand))
        return LatticeValue::of(c->value);
    if (const auto* r = std::get_if<Register>(&operand)) {
        auto it = register_values.find(r->id);
        return it == register_values.end() ? LatticeValue::bottom() : it->second;
    }
    const auto depth = std::get<Placeholder>(operand).depth;
    return depth < entry_values.size() ? entry_values[depth] : LatticeValue::bottom();
}

LatticeValue TIRBlock::exit_value(std::uint32_t depth) const
{
    if (depth < exit_stack.size())
        return value_of(exit_stack[depth]);
    const auto entry_depth =
        entry_stack_arity + (depth - static_cast<std::uint32_t>(exit_stack.size()));
    return value_of(Placeholder{entry_depth});
}

TIRBlock symbolic_exec_block(std::span<const Instruction> instrs, RegisterAllocator& registers)
{
    if (instrs.empty())
        throw DecompilationError("symbolic execution of an empty block");

    TIRBlock block;
    block.entry_pc = instrs.front().pc;
    block.last_pc = instrs.back().pc;
    block.starts_with_jumpdest = instrs.front().opcode->is_jumpdest() && !instrs.front().is_invalid;

    // back() is the top of the symbolic stack.
    std::vector<Operand> stack;
    std::uint32_t arity = 0;
    auto ensure = [&](std::size_t n) {
        while (stack.size() < n)
            stack.insert(stack.begin(), Placeholder{arity++});
    };

    for (const auto& ins : instrs) {
        const OpcodeSpec& spec = *ins.opcode;
        if (spec.is_push()) {
            auto reg = registers.fresh(ins.pc);
            block.ops.push_back({ins.pc, &spec, reg, {}, ins.operand, {}});
            stack.push_back(Constant{*ins.operand, reg.id});
            block.stack_delta += 1;
        } else if (spec.is_pop()) {
            ensure(1);
            stack.pop_back();
            block.stack_delta -= 1;
        } else if (spec.is_dup()) {
            const std::size_t n = spec.byte_value - 0x80 + 1;
            ensure(n);
            stack.push_back(stack[stack.size() - n]);
            block.stack_delta += 1;
        } else if (spec.is_swap()) {
            const std::size_t n = spec.byte_value - 0x90 + 1;
            ensure(n + 1);
            std::swap(stack.back(), stack[stack.size() - 1 - n]);
        } else {
            TIROp op;
            op.pc = ins.pc;
            op.opcode = &spec;
            ensure(spec.pops);
            for (unsigned i = 0; i < spec.pops; ++i) {
                op.args.push_back(stack.back());
                stack.pop_back();
            }
            if (spec.pushes > 0) {
                op.lhs = registers.fresh(ins.pc);
                stack.push_back(*op.lhs);
            }
            block.stack_delta += static_cast<std::int64_t>(spec.pushes) - spec.pops;
            block.ops.push_back(std::move(op));
        }
        if (stack.size() > max_stack_depth)
            block.stack_overflow = true;
    }

    const Instruction& last = instrs.back();
    block.halts = last.opcode->halts || last.is_invalid;
    if (!block.halts && !last.opcode->is_jump())
        block.fallthrough_pc = last.next_pc();

    block.entry_stack_arity = arity;
    block.exit_stack.assign(stack.rbegin(), stack.rend());

    if (static_cast<std::int64_t>(block.exit_stack.size()) !=
        static_cast<std::int64_t>(arity) + block.stack_delta)
        throw DecompilationError("stack balance violated in block " + pc_hex(block.entry_pc));
    return block;
}

namespace {

using Fold = std::function<Word(const std::vector<Word>&)>;

Word pow_mod(Word base, Word exp)
{
    Word result = 1;
    while (exp != 0) {
        if ((exp & 1) != 0)
            result *= base;
        base *= base;
        exp >>= 1;
    }
    return result;
}

const Fold* fold_for(std::string_view m)
{
    static const std::map<std::string_view, Fold> folds = {
        {"ADD", [](const std::vector<Word>& a) { return Word(a[0] + a[1]); }},
        {"MUL", [](const std::vector<Word>& a) { return Word(a[0] * a[1]); }},
        {"SUB", [](const std::vector<Word>& a) { return Word(a[0] - a[1]); }},
        {"DIV", [](const std::vector<Word>& a) { return a[1] == 0 ? Word(0) : Word(a[0] / a[1]); }},
        {"MOD", [](const std::vector<Word>& a) { return a[1] == 0 ? Word(0) : Word(a[0] % a[1]); }},
        {"EXP", [](const std::vector<Word>& a) { return pow_mod(a[0], a[1]); }},
        {"LT", [](const std::vector<Word>& a) { return Word(a[0] < a[1] ? 1 : 0); }},
        {"GT", [](const std::vector<Word>& a) { return Word(a[0] > a[1] ? 1 : 0); }},
        {"EQ", [](const std::vector<Word>& a) { return Word(a[0] == a[1] ? 1 : 0); }},
        {"ISZERO", [](const std::vector<Word>& a) { return Word(a[0] == 0 ? 1 : 0); }},
        {"AND", [](const std::vector<Word>& a) { return Word(a[0] & a[1]); }},
        {"OR", [](const std::vector<Word>& a) { return Word(a[0] | a[1]); }},
        {"XOR", [](const std::vector<Word>& a) { return Word(a[0] ^ a[1]); }},
        {"NOT", [](const std::vector<Word>& a) { return Word(~a[0]); }},
        {"BYTE", [](const std::vector<Word>& a) {
             return a[0] >= 32 ? Word(0) : Word((a[1] >> (8 * (31 - a[0].template convert_to<unsigned>()))) & 0xff);
         }},
    };
    auto it = folds.find(m);
    return it == folds.end() ? nullptr : &it->second;
}

}  // namespace

LatticeValue evaluate_op(const OpcodeSpec& opcode, std::span<const LatticeValue> args,
                         std::size_t cap)
{
    const Fold* fold = fold_for(opcode.mnemonic);
    if (fold == nullptr)
        return LatticeValue::top();
    for (const auto& a : args) {
        if (a.is_top())
            return LatticeValue::top();
    }
    for (const auto& a : args) {
        if (a.is_bottom())
            return LatticeValue::bottom();
    }
    std::size_t product = 1;
    for (const auto& a : args) {
        product *= a.values().size();
        if (product > cap * cap)
            return LatticeValue::top();
    }

    std::set<Word> out;
    std::vector<Word> current(args.size());
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == args.size()) {
            out.insert((*fold)(current));
            return;
        }
        for (const auto& v : args[i].values()) {
            current[i] = v;
            rec(i + 1);
        }
    };
    rec(0);
    return LatticeValue::of(std::move(out), cap);
}

}  // namespace evmlens
