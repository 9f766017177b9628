// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#include <evmlens/cfg.hpp>

#include <evmlens/errors.hpp>

#include <algorithm>
#include <deque>
#include <limits>
#include <sstream>

namespace evmlens {

const TIRBlock* Cfg::find(BlockKey key) const
{
    auto it = blocks.find(key);
    return it == blocks.end() ? nullptr : &it->second;
}

const TIRBlock* Cfg::find_label(std::uint64_t label) const
{
    for (const auto& [key, block] : blocks) {
        if (block.label() == label)
            return &block;
    }
    return nullptr;
}

std::set<std::uint64_t> Cfg::labels() const
{
    std::set<std::uint64_t> out;
    for (const auto& [key, block] : blocks)
        out.insert(block.label());
    return out;
}

std::set<std::pair<std::uint64_t, std::uint64_t>> Cfg::label_edges() const
{
    std::set<std::pair<std::uint64_t, std::uint64_t>> out;
    for (const auto& [key, block] : blocks) {
        for (const auto& s : block.successors)
            out.emplace(block.label(), blocks.at(s).label());
    }
    return out;
}

bool Cfg::has_clones() const
{
    return std::any_of(blocks.begin(), blocks.end(),
                       [](const auto& kv) { return kv.first.tag != 0; });
}

namespace {

class Solver
{
public:
    Solver(Cfg& cfg, const DecompilerConfig& config) : cfg_(cfg), config_(config)
    {
        for (const auto& [key, block] : cfg_.blocks) {
            if (key.tag != 0)
                continue;
            block_pcs_.insert(key.pc);
            if (block.starts_with_jumpdest)
                jumpdests_.insert(key.pc);
        }
    }

    void run()
    {
        reset();
        for (auto& [key, block] : cfg_.blocks) {
            if (block.fallthrough_pc && block_pcs_.contains(*block.fallthrough_pc))
                add_edge(key, route(key, *block.fallthrough_pc));
        }

        while (true) {
            if (++cfg_.iterations > config_.max_iterations) {
                cfg_.bounded = true;
                break;
            }
            update_demands();
            if (!propagate())
                break;
            if (!resolve_jumps())
                break;
        }
        finalize();
    }

private:
    Cfg& cfg_;
    const DecompilerConfig& config_;
    std::set<std::uint64_t> block_pcs_;
    std::set<std::uint64_t> jumpdests_;
    std::map<BlockKey, std::size_t> demand_;
    std::size_t ticks_ = 0;

    bool expired()
    {
        if (cfg_.timed_out)
            return true;
        if (!config_.deadline || (++ticks_ & 31) != 0)
            return false;
        if (std::chrono::steady_clock::now() > *config_.deadline)
            cfg_.timed_out = true;
        return cfg_.timed_out;
    }

    void reset()
    {
        cfg_.unresolved.clear();
        cfg_.iterations = 0;
        cfg_.bounded = false;
        cfg_.const_set_cap = config_.const_set_cap;
        demand_.clear();
        for (auto& [key, block] : cfg_.blocks) {
            block.successors.clear();
            block.predecessors.clear();
            block.entry_values.clear();
            block.register_values.clear();
            block.throws_invalid_jump = false;
            if (auto* j = block.jump())
                j->jump_targets.clear();
            demand_[key] = block.entry_stack_arity;
        }
    }

    BlockKey route(BlockKey from, std::uint64_t pc) const
    {
        auto it = cfg_.routes.find({from, pc});
        return it == cfg_.routes.end() ? BlockKey{pc, 0} : it->second;
    }

    bool add_edge(BlockKey from, BlockKey to)
    {
        auto& src = cfg_.blocks.at(from);
        if (!src.successors.insert(to).second)
            return false;
        cfg_.blocks.at(to).predecessors.insert(from);
        return true;
    }

    // Depth of entry stack each block must know so that its successors can read theirs.
    void update_demands()
    {
        std::deque<BlockKey> work;
        for (const auto& [key, block] : cfg_.blocks)
            work.push_back(key);
        std::set<BlockKey> queued(work.begin(), work.end());
        while (!work.empty()) {
            const BlockKey key = work.front();
            work.pop_front();
            queued.erase(key);
            const auto& block = cfg_.blocks.at(key);
            const std::size_t exit_len = block.exit_stack.size();
            std::size_t need = demand_[key];
            for (const auto& s : block.successors) {
                const std::size_t ds = demand_[s];
                std::size_t want = block.entry_stack_arity + (ds > exit_len ? ds - exit_len : 0);
                need = std::max(need, std::min(want, max_stack_depth));
            }
            if (need != demand_[key]) {
                demand_[key] = need;
                for (const auto& p : block.predecessors) {
                    if (queued.insert(p).second)
                        work.push_back(p);
                }
            }
        }
    }

    void evaluate_block(TIRBlock& block) const
    {
        const std::size_t cap = config_.const_set_cap;
        for (const auto& op : block.ops) {
            if (!op.lhs)
                continue;
            LatticeValue v;
            if (op.constant) {
                v = LatticeValue::of(*op.constant);
            } else {
                std::vector<LatticeValue> args;
                args.reserve(op.args.size());
                for (const auto& a : op.args)
                    args.push_back(block.value_of(a));
                v = evaluate_op(*op.opcode, args, cap);
            }
            block.register_values[op.lhs->id] = std::move(v);
        }
    }

    // Returns false when the deadline expired.
    bool propagate()
    {
        const std::size_t cap = config_.const_set_cap;
        std::deque<BlockKey> work;
        for (const auto& [key, block] : cfg_.blocks)
            work.push_back(key);
        std::set<BlockKey> queued(work.begin(), work.end());
        std::set<BlockKey> visited;

        while (!work.empty()) {
            if (expired())
                return false;
            const BlockKey key = work.front();
            work.pop_front();
            queued.erase(key);
            auto& block = cfg_.blocks.at(key);

            std::vector<LatticeValue> entry(std::max(demand_[key], block.entry_values.size()));
            for (const auto& p : block.predecessors) {
                const auto& pred = cfg_.blocks.at(p);
                for (std::size_t d = 0; d < entry.size(); ++d)
                    entry[d].join(pred.exit_value(static_cast<std::uint32_t>(d)), cap);
            }
            const bool first = visited.insert(key).second;
            if (!first && entry == block.entry_values)
                continue;
            block.entry_values = std::move(entry);
            evaluate_block(block);
            for (const auto& s : block.successors) {
                if (queued.insert(s).second)
                    work.push_back(s);
            }
        }
        return true;
    }

    bool resolve_jumps()
    {
        bool grew = false;
        for (auto& [key, block] : cfg_.blocks) {
            TIROp* j = block.jump();
            if (j == nullptr)
                continue;
            const LatticeValue dest = block.value_of(j->args.at(0));
            if (!dest.is_const())
                continue;
            for (const auto& w : dest.values()) {
                if (w > std::numeric_limits<std::uint64_t>::max())
                    continue;
                const auto pc = w.convert_to<std::uint64_t>();
                if (!jumpdests_.contains(pc))
                    continue;
                grew |= j->jump_targets.insert(pc).second;
                grew |= add_edge(key, route(key, pc));
            }
        }
        return grew;
    }

    void finalize()
    {
        for (auto& [key, block] : cfg_.blocks) {
            const TIROp* j = block.jump();
            if (j == nullptr)
                continue;
            const LatticeValue dest = block.value_of(j->args.at(0));
            if (!dest.is_const())
                cfg_.unresolved.insert(j->pc);
            else if (j->jump_targets.empty())
                block.throws_invalid_jump = true;
        }
    }
};

}  // namespace

Cfg build_cfg(std::vector<TIRBlock> blocks, const DecompilerConfig& config)
{
    Cfg cfg;
    for (auto& b : blocks) {
        const auto key = b.key();
        cfg.blocks.emplace(key, std::move(b));
    }
    cfg.original_block_count = cfg.blocks.size();
    Solver(cfg, config).run();
    return cfg;
}

Cfg split_node(Cfg cfg, BlockKey key, const DecompilerConfig& config)
{
    auto refuse = [&]() -> Cfg {
        cfg.split_refused.insert(key);
        return std::move(cfg);
    };

    const TIRBlock* target = cfg.find(key);
    if (target == nullptr)
        return refuse();
    const TIROp* j = target->jump();
    if (j == nullptr)
        return refuse();
    const LatticeValue dest = target->value_of(j->args.at(0));
    if (!dest.is_const() || dest.values().size() < 2)
        return refuse();
    const auto* ph = std::get_if<Placeholder>(&j->args.at(0));
    if (ph == nullptr)
        return refuse();

    // Walk back along single-predecessor blocks, tracking which entry slot holds the dest.
    std::uint32_t depth = ph->depth;
    std::vector<BlockKey> path{key};
    std::set<BlockKey> seen{key};
    BlockKey cur = key;
    while (true) {
        const auto& preds = cfg.blocks.at(cur).predecessors;
        if (preds.empty())
            return refuse();
        if (preds.size() >= 2)
            break;
        const BlockKey p = *preds.begin();
        if (!seen.insert(p).second)
            return refuse();
        const auto& pb = cfg.blocks.at(p);
        if (depth < pb.exit_stack.size()) {
            const auto* inner = std::get_if<Placeholder>(&pb.exit_stack[depth]);
            if (inner == nullptr)
                return refuse();
            depth = inner->depth;
        } else {
            depth = pb.entry_stack_arity + (depth - static_cast<std::uint32_t>(pb.exit_stack.size()));
        }
        path.push_back(p);
        cur = p;
    }

    const BlockKey ancestor = cur;
    const std::vector<BlockKey> preds(cfg.blocks.at(ancestor).predecessors.begin(),
                                      cfg.blocks.at(ancestor).predecessors.end());
    const LatticeValue first = cfg.blocks.at(preds.front()).exit_value(depth);
    const bool differs = std::any_of(preds.begin() + 1, preds.end(), [&](const BlockKey& p) {
        return cfg.blocks.at(p).exit_value(depth) != first;
    });
    if (!differs)
        return refuse();

    const std::size_t added = (preds.size() - 1) * path.size();
    if (cfg.blocks.size() + added > config.clone_budget * cfg.original_block_count)
        return refuse();

    for (std::size_t i = 1; i < preds.size(); ++i) {
        const std::uint32_t tag = cfg.next_clone_tag++;
        for (const BlockKey& x : path) {
            TIRBlock clone = cfg.blocks.at(x);
            clone.clone_tag = tag;
            const BlockKey ck = clone.key();
            cfg.blocks.emplace(ck, std::move(clone));
            std::vector<std::pair<std::uint64_t, BlockKey>> inherited;
            for (auto it = cfg.routes.lower_bound({x, 0});
                 it != cfg.routes.end() && it->first.first == x; ++it)
                inherited.emplace_back(it->first.second, it->second);
            for (const auto& [pc, to] : inherited)
                cfg.routes[{ck, pc}] = to;
        }
        cfg.routes[{preds[i], ancestor.pc}] = {ancestor.pc, tag};
        for (std::size_t k = path.size() - 1; k >= 1; --k)
            cfg.routes[{{path[k].pc, tag}, path[k - 1].pc}] = {path[k - 1].pc, tag};
    }

    Solver(cfg, config).run();
    return cfg;
}

Cfg merge_clones(const Cfg& cfg)
{
    Cfg out;
    out.entry = {cfg.entry.pc, 0};
    out.original_block_count = cfg.original_block_count;
    out.iterations = cfg.iterations;
    out.bounded = cfg.bounded;
    out.timed_out = cfg.timed_out;
    out.const_set_cap = cfg.const_set_cap;

    const std::size_t cap = std::numeric_limits<std::size_t>::max();
    for (const auto& [key, block] : cfg.blocks) {
        const BlockKey mk{key.pc, 0};
        auto [it, fresh] = out.blocks.try_emplace(mk, block);
        TIRBlock& m = it->second;
        if (fresh) {
            m.clone_tag.reset();
            m.successors.clear();
            m.predecessors.clear();
        } else {
            if (m.entry_values.size() < block.entry_values.size())
                m.entry_values.resize(block.entry_values.size());
            for (std::size_t d = 0; d < block.entry_values.size(); ++d)
                m.entry_values[d].join(block.entry_values[d], cap);
            for (const auto& [reg, v] : block.register_values)
                m.register_values[reg].join(v, cap);
            if (auto* mj = m.jump()) {
                const auto& targets = block.jump()->jump_targets;
                mj->jump_targets.insert(targets.begin(), targets.end());
            }
        }
        for (const auto& s : block.successors)
            m.successors.insert({s.pc, 0});
        for (const auto& p : block.predecessors)
            m.predecessors.insert({p.pc, 0});
    }

    for (auto& [key, block] : out.blocks) {
        block.throws_invalid_jump = false;
        const TIROp* j = block.jump();
        if (j == nullptr)
            continue;
        const LatticeValue dest = block.value_of(j->args.at(0));
        if (!dest.is_const())
            out.unresolved.insert(j->pc);
        else if (j->jump_targets.empty())
            block.throws_invalid_jump = true;
    }
    return out;
}

std::vector<TIRBlock> lift_blocks(const DisassemblyListing& listing)
{
    RegisterAllocator registers;
    std::vector<TIRBlock> blocks;
    for (auto instrs : listing.blocks())
        blocks.push_back(symbolic_exec_block(instrs, registers));
    return blocks;
}

Decompilation decompile(std::span<const std::uint8_t> code, DecompilerConfig config)
{
    if (!config.deadline)
        config.deadline = std::chrono::steady_clock::now() + config.timeout;

    Decompilation result;
    result.listing = disassemble(code);

    Cfg cfg = build_cfg(lift_blocks(result.listing), config);

    while (config.split_nodes && !cfg.timed_out) {
        std::optional<BlockKey> candidate;
        for (const auto& [key, block] : cfg.blocks) {
            if (cfg.split_refused.contains(key))
                continue;
            const TIROp* j = block.jump();
            if (j == nullptr)
                continue;
            const LatticeValue dest = block.value_of(j->args.at(0));
            if (dest.is_const() && dest.values().size() > 1) {
                candidate = key;
                break;
            }
        }
        if (!candidate)
            break;
        cfg = split_node(std::move(cfg), *candidate, config);
    }

    result.cfg = merge_clones(cfg);
    return result;
}

namespace {

std::string format_jump_dest(const TIROp& op)
{
    if (op.jump_targets.size() == 1)
        return pc_hex(*op.jump_targets.begin());
    if (op.jump_targets.size() > 1) {
        std::string s = "{";
        bool first = true;
        for (auto t : op.jump_targets) {
            if (!first)
                s += ", ";
            first = false;
            s += pc_hex(t);
        }
        return s + "}";
    }
    return to_string(op.args.at(0));
}

}  // namespace

std::string format_op(const TIRBlock& /*block*/, const TIROp& op)
{
    std::ostringstream os;
    os << pc_hex(op.pc) << ": ";
    const std::string_view m = op.opcode->mnemonic;
    if (op.is_const()) {
        os << to_string(Operand{*op.lhs}) << " = " << to_hex(*op.constant);
        return os.str();
    }
    if (m == "MSTORE" || m == "SSTORE") {
        os << (m == "MSTORE" ? "M[" : "S[") << to_string(op.args[0]) << "] = "
           << to_string(op.args[1]);
        return os.str();
    }
    if (m == "MLOAD" || m == "SLOAD") {
        os << to_string(Operand{*op.lhs}) << " = " << (m == "MLOAD" ? "M[" : "S[")
           << to_string(op.args[0]) << "]";
        return os.str();
    }
    if (op.lhs)
        os << to_string(Operand{*op.lhs}) << " = ";
    os << m;
    for (std::size_t i = 0; i < op.args.size(); ++i) {
        os << ' ';
        if (i == 0 && op.opcode->alters_flow)
            os << format_jump_dest(op);
        else
            os << to_string(op.args[i]);
    }
    return os.str();
}

std::string format_tir(const Cfg& cfg)
{
    std::ostringstream os;
    bool first = true;
    for (const auto& [key, block] : cfg.blocks) {
        if (block.ops.empty())
            continue;
        if (!first)
            os << '\n';
        first = false;
        for (const auto& op : block.ops)
            os << format_op(block, op) << '\n';
    }
    return os.str();
}

namespace {

std::string dot_escape(std::string_view s)
{
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\')
            out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

std::string node_name(const Cfg& cfg, BlockKey key)
{
    auto name = pc_hex(cfg.blocks.at(key).label());
    if (key.tag != 0)
        name += "#" + std::to_string(key.tag);
    return name;
}

}  // namespace

std::string format_dot(const Cfg& cfg)
{
    std::ostringstream os;
    os << "digraph cfg {\n";
    os << "  node [shape=box, fontname=\"monospace\"];\n";
    for (const auto& [key, block] : cfg.blocks) {
        os << "  \"" << node_name(cfg, key) << "\" [label=\"";
        if (block.ops.empty())
            os << pc_hex(block.entry_pc) << ":\\l";
        for (const auto& op : block.ops)
            os << dot_escape(format_op(block, op)) << "\\l";
        os << "\"];\n";
    }
    for (const auto& [key, block] : cfg.blocks) {
        for (const auto& s : block.successors)
            os << "  \"" << node_name(cfg, key) << "\" -> \"" << node_name(cfg, s) << "\";\n";
    }
    os << "}\n";
    return os.str();
}

}  // namespace evmlens
