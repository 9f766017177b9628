// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#include <evmlens/cfg.hpp>

#include "asm.hpp"
#include "gen.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace evmlens;
using evmlens::testing::assemble;
using evmlens::testing::random_program;
using evmlens::testing::read_file;

namespace {

std::string fixture_text(const std::string& name)
{
    return read_file(std::string(EVMLENS_FIXTURE_DIR) + "/" + name);
}

Bytes fixture(const std::string& name)
{
    return assemble(fixture_text(name));
}

TIRBlock exec_single(const Bytes& code)
{
    const auto listing = disassemble(code);
    RegisterAllocator regs;
    return symbolic_exec_block(listing.blocks().at(0), regs);
}

std::vector<std::string> op_lines(const TIRBlock& b)
{
    std::vector<std::string> out;
    for (const auto& op : b.ops)
        out.push_back(format_op(b, op));
    return out;
}

const TIROp* op_at(const Cfg& cfg, std::uint64_t pc)
{
    for (const auto& [key, block] : cfg.blocks) {
        for (const auto& op : block.ops) {
            if (op.pc == pc)
                return &op;
        }
    }
    return nullptr;
}

std::vector<std::uint64_t> op_pcs(const Cfg& cfg)
{
    std::vector<std::uint64_t> pcs;
    for (const auto& [key, block] : cfg.blocks) {
        for (const auto& op : block.ops)
            pcs.push_back(op.pc);
    }
    std::sort(pcs.begin(), pcs.end());
    return pcs;
}

DecompilerConfig no_split()
{
    DecompilerConfig c;
    c.split_nodes = false;
    return c;
}

}  // namespace

TEST(SymbolicExec, AddConsumesTwoPlaceholders)
{
    const auto b = exec_single(Bytes{0x01});
    EXPECT_EQ(op_lines(b), std::vector<std::string>{"0x0: V0 = ADD S0 S1"});
    EXPECT_EQ(b.entry_stack_arity, 2u);
    ASSERT_EQ(b.exit_stack.size(), 1u);
    EXPECT_EQ(b.exit_stack[0], Operand{(Register{0, 0})});
}

TEST(SymbolicExec, PushesBecomeConstants)
{
    const auto b = exec_single(Bytes{0x60, 0x60, 0x60, 0x40, 0x52});
    EXPECT_EQ(op_lines(b),
              (std::vector<std::string>{"0x0: V0 = 0x60", "0x2: V1 = 0x40", "0x4: M[0x40] = 0x60"}));
    EXPECT_EQ(b.ops[2].name(), "MSTORE");
    ASSERT_EQ(b.ops[2].args.size(), 2u);
    EXPECT_EQ(std::get<Constant>(b.ops[2].args[0]).value, 0x40);
    EXPECT_EQ(std::get<Constant>(b.ops[2].args[1]).value, 0x60);
    EXPECT_TRUE(b.exit_stack.empty());
    EXPECT_EQ(b.entry_stack_arity, 0u);
}

TEST(SymbolicExec, NoStackTraffic)
{
    const auto b = exec_single(Bytes{0x5b, 0x00});
    EXPECT_EQ(op_lines(b), (std::vector<std::string>{"0x0: JUMPDEST", "0x1: STOP"}));
    EXPECT_EQ(b.entry_stack_arity, 0u);
    EXPECT_TRUE(b.exit_stack.empty());
    EXPECT_TRUE(b.halts);
}

TEST(SymbolicExec, ShufflesEmitNothing)
{
    // DUP2 SWAP1 POP: only rewires the stack.
    const auto b = exec_single(Bytes{0x81, 0x90, 0x50});
    EXPECT_TRUE(b.ops.empty());
    EXPECT_EQ(b.entry_stack_arity, 2u);
    ASSERT_EQ(b.exit_stack.size(), 2u);
    EXPECT_EQ(b.exit_stack[0], Operand{Placeholder{1}});
    EXPECT_EQ(b.exit_stack[1], Operand{Placeholder{1}});
}

TEST(SymbolicExec, OverflowIsFlagged)
{
    Bytes code(1100, 0x30);  // ADDRESS x1100
    const auto b = exec_single(code);
    EXPECT_TRUE(b.stack_overflow);
    EXPECT_EQ(b.ops.size(), 1100u);
}

TEST(SymbolicExecProperty, StackBalanceAndNoShuffleOps)
{
    std::mt19937_64 rng(7);
    for (int i = 0; i < 300; ++i) {
        const auto code = assemble(random_program(rng, 1 + static_cast<int>(rng() % 12)));
        for (const auto& b : lift_blocks(disassemble(code))) {
            ASSERT_FALSE(b.stack_overflow);
            EXPECT_EQ(static_cast<std::int64_t>(b.exit_stack.size()),
                      static_cast<std::int64_t>(b.entry_stack_arity) + b.stack_delta);
            for (const auto& op : b.ops) {
                const auto& s = *op.opcode;
                EXPECT_FALSE(s.is_pop() || s.is_dup() || s.is_swap());
                EXPECT_EQ(op.lhs.has_value(), s.pushes == 1);
                if (!op.is_const())
                    EXPECT_EQ(op.args.size(), s.pops);
            }
        }
    }
}

TEST(Lattice, JoinIsUpperBound)
{
    auto a = LatticeValue::of(Word{1});
    auto b = LatticeValue::of(Word{2});
    auto j = a;
    EXPECT_TRUE(j.join(b, 32));
    EXPECT_TRUE(a.leq(j));
    EXPECT_TRUE(b.leq(j));
    EXPECT_FALSE(j.join(a, 32));
    EXPECT_TRUE(LatticeValue::bottom().leq(a));
    EXPECT_TRUE(j.leq(LatticeValue::top()));

    auto capped = LatticeValue::of(Word{1});
    EXPECT_TRUE(capped.join(LatticeValue::of(Word{2}), 1));
    EXPECT_EQ(capped, LatticeValue::top());
}

TEST(Lattice, EvaluateFoldsConstants)
{
    const auto& t = OpcodeTable::standard();
    std::vector<LatticeValue> args{LatticeValue::of(std::set<Word>{1, 2}, 32),
                                   LatticeValue::of(Word{10})};
    EXPECT_EQ(evaluate_op(*t.lookup("ADD"), args, 32), LatticeValue::of(std::set<Word>{11, 12}, 32));
    EXPECT_EQ(evaluate_op(*t.lookup("SUB"), args, 32),
              LatticeValue::of(std::set<Word>{Word{1} - 10, Word{2} - 10}, 32));
    args[1] = LatticeValue::top();
    EXPECT_EQ(evaluate_op(*t.lookup("ADD"), args, 32), LatticeValue::top());
    args[1] = LatticeValue::bottom();
    EXPECT_EQ(evaluate_op(*t.lookup("ADD"), args, 32), LatticeValue::bottom());
    std::vector<LatticeValue> none;
    EXPECT_EQ(evaluate_op(*t.lookup("CALLER"), none, 32), LatticeValue::top());
}

TEST(BuildCfg, SingleBlockNoEdges)
{
    const auto d = decompile(Bytes{0x60, 0x00, 0x60, 0x00, 0x01, 0x00});
    ASSERT_EQ(d.cfg.blocks.size(), 1u);
    EXPECT_TRUE(d.cfg.label_edges().empty());
    EXPECT_TRUE(d.cfg.unresolved.empty());
}

TEST(Decompile, EmptyCode)
{
    const auto d = decompile(Bytes{});
    EXPECT_TRUE(d.cfg.blocks.empty());
    EXPECT_FALSE(d.timed_out());
    EXPECT_EQ(format_tir(d.cfg), "");
}

TEST(Decompile, FactorialGoldenTir)
{
    const auto d = decompile(fixture("factorial.asm"));
    EXPECT_EQ(format_tir(d.cfg), fixture_text("factorial.tir"));
}

TEST(Decompile, FactorialBlocksAndJumps)
{
    const auto d = decompile(fixture("factorial.asm"));
    EXPECT_EQ(d.cfg.labels(),
              (std::set<std::uint64_t>{0x0, 0x31, 0x33, 0x39, 0x45, 0x4a, 0x5c, 0x60, 0x65}));
    const auto* ret = op_at(d.cfg, 0x64);
    ASSERT_NE(ret, nullptr);
    EXPECT_EQ(ret->jump_targets, (std::set<std::uint64_t>{0x4a, 0x5c}));
    const auto edges = d.cfg.label_edges();
    EXPECT_TRUE(edges.contains({0x0, 0x33}));
    EXPECT_TRUE(edges.contains({0x0, 0x31}));
    EXPECT_TRUE(d.cfg.unresolved.empty());
    const auto* div = op_at(d.cfg, 0x26);
    ASSERT_NE(div, nullptr);
    EXPECT_EQ(div->name(), "DIV");
}

TEST(Decompile, JumpToNonJumpdestThrows)
{
    // PUSH1 0x04; JUMP; STOP; STOP  -- 0x4 is not a JUMPDEST
    const auto d = decompile(Bytes{0x60, 0x04, 0x56, 0x00, 0x00});
    const auto* b = d.cfg.find_label(0x0);
    ASSERT_NE(b, nullptr);
    EXPECT_TRUE(b->throws_invalid_jump);
    EXPECT_TRUE(b->successors.empty());
    EXPECT_TRUE(b->jump()->jump_targets.empty());
}

TEST(Decompile, TopDestinationIsUnresolved)
{
    // CALLDATALOAD(0) as the jump destination.
    const auto d = decompile(Bytes{0x60, 0x00, 0x35, 0x56, 0x5b, 0x00});
    EXPECT_EQ(d.cfg.unresolved, (std::set<std::uint64_t>{0x3}));
    EXPECT_TRUE(d.cfg.find_label(0x0)->successors.empty());
}

TEST(SplitNode, SeparatesTargetsPerAncestorPredecessor)
{
    DecompilerConfig config;
    Cfg cfg = build_cfg(lift_blocks(disassemble(fixture("ambiguous_return.asm"))), config);
    const auto* e = cfg.find({0xe, 0});
    ASSERT_NE(e, nullptr);
    EXPECT_EQ(e->jump()->jump_targets, (std::set<std::uint64_t>{0x10, 0x12}));

    Cfg split = split_node(cfg, {0xe, 0}, config);
    EXPECT_TRUE(split.split_refused.empty());
    std::vector<std::set<std::uint64_t>> targets;
    std::size_t a_instances = 0;
    for (const auto& [key, block] : split.blocks) {
        if (key.pc == 0xe)
            targets.push_back(block.jump()->jump_targets);
        if (key.pc == 0xa)
            ++a_instances;
    }
    EXPECT_EQ(a_instances, 2u);
    ASSERT_EQ(targets.size(), 2u);
    std::sort(targets.begin(), targets.end());
    EXPECT_EQ(targets[0], (std::set<std::uint64_t>{0x10}));
    EXPECT_EQ(targets[1], (std::set<std::uint64_t>{0x12}));

    const Cfg merged = merge_clones(split);
    EXPECT_FALSE(merged.has_clones());
    const auto* m = merged.find({0xe, 0});
    ASSERT_NE(m, nullptr);
    EXPECT_EQ(m->jump()->jump_targets, (std::set<std::uint64_t>{0x10, 0x12}));
    EXPECT_EQ(m->successors, (std::set<BlockKey>{{0x10, 0}, {0x12, 0}}));
    EXPECT_EQ(merged.labels(), cfg.labels());
}

TEST(SplitNode, SingletonTargetIsRefused)
{
    DecompilerConfig config;
    Cfg cfg = build_cfg(lift_blocks(disassemble(fixture("ambiguous_return.asm"))), config);
    Cfg out = split_node(cfg, {0xa, 0}, config);
    EXPECT_TRUE(out.split_refused.contains(BlockKey{0xa, 0}));
    EXPECT_EQ(out.blocks.size(), cfg.blocks.size());
}

TEST(SplitNode, BudgetRefuses)
{
    DecompilerConfig config;
    config.clone_budget = 1;
    Cfg cfg = build_cfg(lift_blocks(disassemble(fixture("ambiguous_return.asm"))), config);
    Cfg out = split_node(cfg, {0xe, 0}, config);
    EXPECT_TRUE(out.split_refused.contains(BlockKey{0xe, 0}));
    EXPECT_FALSE(out.has_clones());
}

TEST(SplitNode, DiamondWithEqualConstantsNeedsNoSplit)
{
    const auto d = decompile(fixture("diamond_same.asm"));
    for (const auto& [key, block] : d.cfg.blocks) {
        if (const auto* j = block.jump())
            EXPECT_EQ(j->jump_targets.size(), 1u) << pc_hex(j->pc);
    }
    EXPECT_TRUE(d.cfg.unresolved.empty());
}

TEST(MergeClones, IdentityWithoutClones)
{
    const auto d = decompile(fixture("factorial.asm"), no_split());
    const Cfg m = merge_clones(d.cfg);
    EXPECT_EQ(format_tir(m), format_tir(d.cfg));
    EXPECT_EQ(m.label_edges(), d.cfg.label_edges());
}

TEST(Decompile, FactorialSplitNeutrality)
{
    const auto plain = decompile(fixture("factorial.asm"), no_split());
    const auto split = decompile(fixture("factorial.asm"));
    EXPECT_EQ(split.cfg.labels(), plain.cfg.labels());
    EXPECT_EQ(op_pcs(split.cfg), op_pcs(plain.cfg));
    const auto e1 = plain.cfg.label_edges();
    const auto e2 = split.cfg.label_edges();
    EXPECT_TRUE(std::includes(e2.begin(), e2.end(), e1.begin(), e1.end()));
}

TEST(Decompile, AmbiguousReturnEndToEnd)
{
    const auto d = decompile(fixture("ambiguous_return.asm"));
    EXPECT_FALSE(d.cfg.has_clones());
    EXPECT_EQ(op_at(d.cfg, 0xf)->jump_targets, (std::set<std::uint64_t>{0x10, 0x12}));
    EXPECT_TRUE(d.cfg.unresolved.empty());
}

TEST(DecompileProperty, DeterminismSoundnessNeutrality)
{
    std::mt19937_64 rng(0xdec0);
    for (int i = 0; i < 200; ++i) {
        const auto code = assemble(random_program(rng, 2 + static_cast<int>(rng() % 10)));
        const auto listing = disassemble(code);
        std::set<std::uint64_t> jumpdests;
        for (const auto& ins : listing.instructions) {
            if (ins.opcode->is_jumpdest())
                jumpdests.insert(ins.pc);
        }

        const auto a = decompile(code);
        const auto b = decompile(code);
        ASSERT_EQ(format_tir(a.cfg), format_tir(b.cfg)) << "case " << i;
        ASSERT_EQ(a.cfg.label_edges(), b.cfg.label_edges());
        EXPECT_FALSE(a.cfg.has_clones());
        EXPECT_FALSE(a.cfg.bounded);

        for (const auto& [key, block] : a.cfg.blocks) {
            if (const auto* j = block.jump()) {
                for (auto t : j->jump_targets)
                    EXPECT_TRUE(jumpdests.contains(t)) << pc_hex(t);
            }
            for (const auto& s : block.successors)
                EXPECT_TRUE(a.cfg.find(s)->predecessors.contains(key));
        }

        const auto plain = decompile(code, no_split());
        EXPECT_EQ(op_pcs(a.cfg), op_pcs(plain.cfg));
        for (const auto& [key, block] : plain.cfg.blocks) {
            const auto* pj = block.jump();
            if (pj == nullptr || pj->jump_targets.empty())
                continue;
            const auto* sj = op_at(a.cfg, pj->pc);
            ASSERT_NE(sj, nullptr);
            // Never a disjoint replacement.
            std::vector<std::uint64_t> common;
            std::set_intersection(pj->jump_targets.begin(), pj->jump_targets.end(),
                                  sj->jump_targets.begin(), sj->jump_targets.end(),
                                  std::back_inserter(common));
            EXPECT_FALSE(common.empty()) << "case " << i << " jump " << pc_hex(pj->pc);
        }
    }
}

TEST(Decompile, IterationBoundIsReported)
{
    DecompilerConfig config;
    config.max_iterations = 1;
    const auto d = decompile(fixture("factorial.asm"), config);
    EXPECT_TRUE(d.cfg.bounded);
}

TEST(Decompile, DotOutput)
{
    const auto d = decompile(fixture("ambiguous_return.asm"));
    const auto dot = format_dot(d.cfg);
    EXPECT_TRUE(dot.starts_with("digraph"));
    EXPECT_NE(dot.find("0xf: JUMP {0x10, 0x12}"), std::string::npos);
}
