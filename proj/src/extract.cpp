// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#include <evmlens/extract.hpp>

#include <algorithm>
#include <variant>

namespace evmlens {

namespace {

using enum ColumnType;

RelationSchema cols(std::initializer_list<ColumnType> c)
{
    return RelationSchema{std::vector<ColumnType>(c)};
}

std::string reg_name(RegisterId id)
{
    return "V" + std::to_string(id);
}

/// Names operands, collapsing entry-stack placeholders through predecessors.
class VariableNamer
{
public:
    explicit VariableNamer(const Cfg& cfg) : cfg_(cfg) {}

    std::string name(const TIRBlock& block, const Operand& operand)
    {
        if (const auto* r = std::get_if<Register>(&operand))
            return reg_name(r->id);
        if (const auto* c = std::get_if<Constant>(&operand))
            return reg_name(c->source);
        return resolve(block.key(), std::get<Placeholder>(operand).depth);
    }

    const std::map<std::string, std::set<std::string>>& phis() const noexcept { return phis_; }
    /// Placeholder names that survived, with their block and depth.
    const std::map<std::string, std::pair<BlockKey, std::uint32_t>>& placeholders() const noexcept
    {
        return placeholders_;
    }

private:
    using Slot = std::pair<BlockKey, std::uint32_t>;

    std::string placeholder_name(const TIRBlock& block, std::uint32_t depth) const
    {
        return "S" + std::to_string(depth) + "_" + pc_hex(block.label());
    }

    std::string exit_source(const TIRBlock& pred, std::uint32_t depth)
    {
        if (depth < pred.exit_stack.size())
            return name(pred, pred.exit_stack[depth]);
        return resolve(pred.key(), pred.entry_stack_arity +
                                       (depth - static_cast<std::uint32_t>(pred.exit_stack.size())));
    }

    std::string resolve(BlockKey key, std::uint32_t depth)
    {
        const Slot slot{key, depth};
        if (auto it = memo_.find(slot); it != memo_.end())
            return it->second;
        const TIRBlock& block = *cfg_.find(key);
        // Depths the solver never demanded carry nothing worth tracing.
        if (depth >= block.entry_values.size()) {
            memo_.emplace(slot, placeholder_name(block, depth));
            return memo_.at(slot);
        }
        if (active_.contains(slot)) {
            forced_.insert(slot);
            return placeholder_name(block, depth);
        }

        std::set<std::string> sources;
        active_.insert(slot);
        for (const auto& p : block.predecessors)
            sources.insert(exit_source(*cfg_.find(p), depth));
        active_.erase(slot);

        std::string result;
        if (sources.size() == 1 && !forced_.contains(slot)) {
            result = *sources.begin();
        }
        else {
            result = placeholder_name(block, depth);
            sources.erase(result);
            phis_[result].insert(sources.begin(), sources.end());
            placeholders_.emplace(result, slot);
        }
        memo_.emplace(slot, result);
        return result;
    }

    const Cfg& cfg_;
    std::map<Slot, std::string> memo_;
    std::set<Slot> active_;
    std::set<Slot> forced_;
    std::map<std::string, std::set<std::string>> phis_;
    std::map<std::string, Slot> placeholders_;
};

void emit_values(FactBase& facts, const std::string& var, const LatticeValue& v)
{
    if (!v.is_const())
        return;
    for (const auto& w : v.values())
        facts.insert("value", {var, to_hex(w)});
}

std::set<std::uint64_t> first_statements(const Cfg& cfg, BlockKey key)
{
    std::set<std::uint64_t> out;
    std::set<BlockKey> seen;
    std::vector<BlockKey> work{key};
    while (!work.empty()) {
        auto k = work.back();
        work.pop_back();
        if (!seen.insert(k).second)
            continue;
        const auto& b = *cfg.find(k);
        if (!b.ops.empty())
            out.insert(b.ops.front().pc);
        else
            work.insert(work.end(), b.successors.begin(), b.successors.end());
    }
    return out;
}

/// Immediate dominators over nodes 0..n-1 from `root`; -1 marks unreachable nodes.
std::vector<int> immediate_dominators(const std::vector<std::vector<int>>& succ, int root)
{
    const auto n = static_cast<int>(succ.size());
    std::vector<int> order;  // postorder
    std::vector<int> po(static_cast<std::size_t>(n), -1);
    {
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        std::vector<std::pair<int, std::size_t>> stack{{root, 0}};
        seen[static_cast<std::size_t>(root)] = 1;
        while (!stack.empty()) {
            auto& [v, i] = stack.back();
            const auto& s = succ[static_cast<std::size_t>(v)];
            if (i < s.size()) {
                int w = s[i++];
                if (!seen[static_cast<std::size_t>(w)]) {
                    seen[static_cast<std::size_t>(w)] = 1;
                    stack.emplace_back(w, 0);
                }
            }
            else {
                po[static_cast<std::size_t>(v)] = static_cast<int>(order.size());
                order.push_back(v);
                stack.pop_back();
            }
        }
    }
    std::vector<std::vector<int>> pred(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) {
        if (po[static_cast<std::size_t>(v)] < 0)
            continue;
        for (int w : succ[static_cast<std::size_t>(v)])
            pred[static_cast<std::size_t>(w)].push_back(v);
    }

    std::vector<int> idom(static_cast<std::size_t>(n), -1);
    idom[static_cast<std::size_t>(root)] = root;
    auto intersect = [&](int a, int b) {
        while (a != b) {
            while (po[static_cast<std::size_t>(a)] < po[static_cast<std::size_t>(b)])
                a = idom[static_cast<std::size_t>(a)];
            while (po[static_cast<std::size_t>(b)] < po[static_cast<std::size_t>(a)])
                b = idom[static_cast<std::size_t>(b)];
        }
        return a;
    };
    for (bool changed = true; changed;) {
        changed = false;
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            int v = *it;
            if (v == root)
                continue;
            int next = -1;
            for (int p : pred[static_cast<std::size_t>(v)]) {
                if (idom[static_cast<std::size_t>(p)] < 0)
                    continue;
                next = next < 0 ? p : intersect(p, next);
            }
            if (next != idom[static_cast<std::size_t>(v)]) {
                idom[static_cast<std::size_t>(v)] = next;
                changed = true;
            }
        }
    }
    return idom;
}

void emit_dominance(FactBase& facts, const std::string& rel, const std::vector<int>& idom,
                    int root, const std::vector<std::string>& names)
{
    for (std::size_t b = 0; b < idom.size(); ++b) {
        if (idom[b] < 0)
            continue;
        for (int a = static_cast<int>(b);; a = idom[static_cast<std::size_t>(a)]) {
            facts.insert(rel, {names[static_cast<std::size_t>(a)], names[b]});
            if (a == root)
                break;
        }
    }
}

}  // namespace

const std::map<std::string, RelationSchema, std::less<>>& edb_schema()
{
    static const std::map<std::string, RelationSchema, std::less<>> schema{
        {"entry", cols({statement})},
        {"edge", cols({statement, statement})},
        {"def", cols({variable, statement})},
        {"use", cols({variable, statement, number})},
        {"op", cols({statement, opcode})},
        {"value", cols({variable, value})},
        {"phi", cols({variable, variable})},
        {"block", cols({statement, statement})},
        {"in_block_before", cols({statement, statement})},
        {"op_CALL", cols({statement, variable, variable, variable, variable, variable, variable,
                          variable})},
        {"op_JUMPI", cols({statement, variable, variable})},
        {"sstore", cols({statement, variable, variable})},
        {"sload", cols({statement, variable, variable})},
        {"mstore", cols({statement, variable, variable})},
        {"mload", cols({statement, variable, variable})},
        {"unresolved", cols({statement})},
        {"invalid_jump", cols({statement})},
        {"dom", cols({statement, statement})},
        {"pdom", cols({statement, statement})},
    };
    return schema;
}

FactBase compute_dominators(const Cfg& cfg)
{
    FactBase facts;
    facts.declare("dom", edb_schema().at("dom"));
    facts.declare("pdom", edb_schema().at("pdom"));
    if (cfg.blocks.empty() || cfg.find(cfg.entry) == nullptr)
        return facts;

    std::map<BlockKey, int> index;
    std::vector<std::string> names;
    for (const auto& [key, block] : cfg.blocks) {
        index.emplace(key, static_cast<int>(names.size()));
        names.push_back(pc_hex(block.label()));
    }
    const auto n = static_cast<int>(names.size());
    std::vector<std::vector<int>> succ(static_cast<std::size_t>(n));
    std::vector<std::vector<int>> rsucc(static_cast<std::size_t>(n) + 1);
    for (const auto& [key, block] : cfg.blocks) {
        const int v = index.at(key);
        for (const auto& s : block.successors) {
            succ[static_cast<std::size_t>(v)].push_back(index.at(s));
            rsucc[static_cast<std::size_t>(index.at(s))].push_back(v);
        }
        if (block.successors.empty())
            rsucc[static_cast<std::size_t>(n)].push_back(v);
    }

    emit_dominance(facts, "dom", immediate_dominators(succ, index.at(cfg.entry)),
                   index.at(cfg.entry), names);
    names.push_back("0xEXIT");
    emit_dominance(facts, "pdom", immediate_dominators(rsucc, n), n, names);
    return facts;
}

FactBase extract_facts(const Cfg& cfg)
{
    FactBase facts;
    for (const auto& [name, schema] : edb_schema())
        facts.declare(name, schema);

    VariableNamer namer(cfg);
    if (const auto* entry = cfg.find(cfg.entry)) {
        for (auto s : first_statements(cfg, entry->key()))
            facts.insert("entry", {pc_hex(s)});
    }

    for (const auto& [key, block] : cfg.blocks) {
        const auto label = pc_hex(block.label());
        for (std::size_t i = 0; i < block.ops.size(); ++i) {
            const auto& op = block.ops[i];
            const auto stmt = pc_hex(op.pc);
            facts.insert("op", {stmt, std::string(op.name())});
            facts.insert("block", {stmt, label});
            for (std::size_t j = 0; j < i; ++j)
                facts.insert("in_block_before", {pc_hex(block.ops[j].pc), stmt});
            if (i + 1 < block.ops.size())
                facts.insert("edge", {stmt, pc_hex(block.ops[i + 1].pc)});

            std::vector<std::string> args;
            for (std::size_t a = 0; a < op.args.size(); ++a) {
                args.push_back(namer.name(block, op.args[a]));
                facts.insert("use", {args.back(), stmt, std::to_string(a)});
            }
            std::string lhs;
            if (op.lhs) {
                lhs = reg_name(op.lhs->id);
                facts.insert("def", {lhs, stmt});
                if (op.constant)
                    facts.insert("value", {lhs, to_hex(*op.constant)});
                else if (auto it = block.register_values.find(op.lhs->id);
                         it != block.register_values.end())
                    emit_values(facts, lhs, it->second);
            }

            const auto& spec = *op.opcode;
            if (op.is_const())
                continue;
            if (spec.mnemonic == "CALL" && args.size() == 7) {
                Tuple t{stmt};
                t.insert(t.end(), args.begin(), args.end());
                facts.insert("op_CALL", std::move(t));
            }
            else if (spec.is_jumpi() && args.size() == 2)
                facts.insert("op_JUMPI", {stmt, args[0], args[1]});
            else if (spec.mnemonic == "SSTORE" && args.size() == 2)
                facts.insert("sstore", {stmt, args[0], args[1]});
            else if (spec.mnemonic == "SLOAD" && args.size() == 1 && op.lhs)
                facts.insert("sload", {stmt, args[0], lhs});
            else if ((spec.mnemonic == "MSTORE" || spec.mnemonic == "MSTORE8") && args.size() == 2)
                facts.insert("mstore", {stmt, args[0], args[1]});
            else if (spec.mnemonic == "MLOAD" && args.size() == 1 && op.lhs)
                facts.insert("mload", {stmt, args[0], lhs});
        }

        if (!block.ops.empty()) {
            const auto last = pc_hex(block.ops.back().pc);
            for (const auto& s : block.successors) {
                for (auto t : first_statements(cfg, s))
                    facts.insert("edge", {last, pc_hex(t)});
            }
        }
        if (block.throws_invalid_jump) {
            if (const auto* j = block.jump())
                facts.insert("invalid_jump", {pc_hex(j->pc)});
        }
    }
    for (auto pc : cfg.unresolved)
        facts.insert("unresolved", {pc_hex(pc)});

    for (const auto& [var, sources] : namer.phis()) {
        for (const auto& s : sources)
            facts.insert("phi", {var, s});
    }
    for (const auto& [var, slot] : namer.placeholders()) {
        const auto& b = *cfg.find(slot.first);
        if (slot.second < b.entry_values.size())
            emit_values(facts, var, b.entry_values[slot.second]);
    }

    facts.merge(compute_dominators(cfg));
    return facts;
}

}  // namespace evmlens
