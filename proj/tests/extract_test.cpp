// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#include <evmlens/extract.hpp>

#include "asm.hpp"
#include "gen.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace evmlens;
using evmlens::testing::assemble;
using evmlens::testing::dominance_mismatch;
using evmlens::testing::random_program;
using evmlens::testing::read_file;

namespace fs = std::filesystem;

namespace {

Bytes fixture(const std::string& name)
{
    return assemble(read_file(std::string(EVMLENS_FIXTURE_DIR) + "/" + name));
}

FactBase facts_of(const Bytes& code)
{
    return extract_facts(decompile(code).cfg);
}

fs::path scratch_dir(const std::string& name)
{
    auto p = fs::temp_directory_path() / ("evmlens_extract_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check_dominance_against_oracle(const Cfg& cfg)
{
    EXPECT_EQ(dominance_mismatch(cfg), "");
}

}  // namespace

TEST(FactBase, SchemaEnforced)
{
    FactBase f;
    f.declare("edge", {{ColumnType::statement, ColumnType::statement}});
    EXPECT_THROW(f.insert("edge", {"0x1"}), SchemaError);
    EXPECT_THROW(f.insert("nope", {"0x1"}), SchemaError);
    EXPECT_THROW(f.declare("edge", {{ColumnType::statement}}), SchemaError);
    EXPECT_TRUE(f.insert("edge", {"0x1", "0x2"}));
    EXPECT_FALSE(f.insert("edge", {"0x1", "0x2"}));
    f.validate();
    f.insert("edge", {"0x01", "0x2"});
    EXPECT_THROW(f.validate(), SchemaError);
}

TEST(Extract, JumpiFacts)
{
    const auto f = facts_of(fixture("factorial.asm"));
    EXPECT_TRUE(f.contains("op", {"0x30", "JUMPI"}));
    EXPECT_TRUE(f.contains("use", {"V7", "0x30", "1"}));
    EXPECT_TRUE(f.contains("edge", {"0x30", "0x33"}));
    EXPECT_TRUE(f.contains("edge", {"0x30", "0x31"}));
    EXPECT_TRUE(f.contains("op_JUMPI", {"0x30", "V8", "V7"}));
}

TEST(Extract, ConstantFacts)
{
    const auto f = facts_of(fixture("factorial.asm"));
    EXPECT_TRUE(f.contains("def", {"V0", "0x0"}));
    EXPECT_TRUE(f.contains("value", {"V0", "0x60"}));
    EXPECT_TRUE(f.contains("op", {"0x0", "CONST"}));
    EXPECT_EQ(f.relation("entry"), (std::set<Tuple>{{"0x0"}}));
}

TEST(Extract, CallTupleHasEightColumns)
{
    // gas, to, value, in, insize, out, outsize pushed in reverse order.
    const auto f = facts_of(assemble(R"(
        PUSH1 0x00
        PUSH1 0x00
        PUSH1 0x00
        PUSH1 0x00
        CALLVALUE
        CALLER
        GAS
        CALL
        POP
        STOP
    )"));
    ASSERT_EQ(f.size("op_CALL"), 1u);
    const auto& t = *f.relation("op_CALL").begin();
    ASSERT_EQ(t.size(), 8u);
    EXPECT_EQ(t[0], "0xb");
    EXPECT_TRUE(f.contains("op", {t[1], "GAS"}) || f.contains("def", {t[1], "0xa"}));
    EXPECT_TRUE(f.contains("def", {t[1], "0xa"}));
    EXPECT_TRUE(f.contains("def", {t[2], "0x9"}));
    EXPECT_TRUE(f.contains("def", {t[3], "0x8"}));
}

TEST(Extract, StorageAndMemoryShapes)
{
    const auto f = facts_of(assemble(R"(
        PUSH1 0x01
        PUSH1 0x00
        SSTORE
        PUSH1 0x00
        SLOAD
        PUSH1 0x40
        MSTORE
        PUSH1 0x40
        MLOAD
        STOP
    )"));
    EXPECT_TRUE(f.contains("sstore", {"0x4", "V1", "V0"}));
    EXPECT_TRUE(f.contains("sload", {"0x7", "V2", "V3"}));
    EXPECT_TRUE(f.contains("mstore", {"0xa", "V4", "V3"}));
    EXPECT_TRUE(f.contains("mload", {"0xd", "V5", "V6"}));
}

TEST(Extract, PlaceholdersCollapseOrBecomePhi)
{
    const auto f = facts_of(assemble(R"(
        CALLDATASIZE
        PUSH1 @right
        JUMPI
        PUSH1 0x07
        PUSH1 @join
        JUMP
    right:
        JUMPDEST
        PUSH1 0x09
        PUSH1 @join
        JUMP
    join:
        JUMPDEST
        PUSH1 0x00
        SSTORE
        STOP
    )"));
    ASSERT_EQ(f.size("sstore"), 1u);
    const auto& st = *f.relation("sstore").begin();
    const std::string& val = st[2];
    EXPECT_EQ(val.rfind("S0_", 0), 0u) << val;
    EXPECT_EQ(f.size("phi"), 2u);
    EXPECT_TRUE(f.contains("value", {val, "0x7"}));
    EXPECT_TRUE(f.contains("value", {val, "0x9"}));
    for (const auto& t : f.relation("phi")) {
        EXPECT_EQ(t[0], val);
        EXPECT_TRUE(f.contains("op", {pc_hex(0), "CALLDATASIZE"}));
    }

    // A single predecessor: the placeholder is the pushed register itself.
    const auto g = facts_of(assemble(R"(
        CALLER
        PUSH1 @next
        JUMP
    next:
        JUMPDEST
        PUSH1 0x00
        SSTORE
        STOP
    )"));
    EXPECT_TRUE(g.contains("sstore", {"0x7", "V2", "V0"}));
    EXPECT_TRUE(g.relation("phi").empty());
}

TEST(Extract, UnresolvedAndInvalidJumps)
{
    auto f = facts_of(Bytes{0x60, 0x00, 0x35, 0x56, 0x5b, 0x00});
    EXPECT_EQ(f.relation("unresolved"), (std::set<Tuple>{{"0x3"}}));
    f = facts_of(Bytes{0x60, 0x04, 0x56, 0x00, 0x00});
    EXPECT_EQ(f.relation("invalid_jump"), (std::set<Tuple>{{"0x2"}}));
}

TEST(Dominators, Chain)
{
    const auto f = compute_dominators(decompile(assemble(R"(
        PUSH1 @b
        JUMP
    b:
        JUMPDEST
        PUSH1 @c
        JUMP
    c:
        JUMPDEST
        STOP
    )")).cfg);
    EXPECT_TRUE(f.contains("dom", {"0x0", "0x3"}));
    EXPECT_TRUE(f.contains("dom", {"0x0", "0x7"}));
    EXPECT_TRUE(f.contains("dom", {"0x3", "0x7"}));
    EXPECT_FALSE(f.contains("dom", {"0x7", "0x3"}));
    EXPECT_TRUE(f.contains("dom", {"0x3", "0x3"}));
    EXPECT_TRUE(f.contains("pdom", {"0x7", "0x0"}));
    EXPECT_TRUE(f.contains("pdom", {"0xEXIT", "0x0"}));
}

TEST(Dominators, Diamond)
{
    const auto code = assemble(R"(
        CALLDATASIZE
        PUSH1 @c
        JUMPI
        PUSH1 @d
        JUMP
    c:
        JUMPDEST
        PUSH1 @d
        JUMP
    d:
        JUMPDEST
        STOP
    )");
    const auto cfg = decompile(code).cfg;
    const auto f = compute_dominators(cfg);
    const auto b = pc_hex(0x4), c = pc_hex(0x7), d = pc_hex(0xb);
    EXPECT_TRUE(f.contains("dom", {"0x0", d}));
    EXPECT_FALSE(f.contains("dom", {b, d}));
    EXPECT_FALSE(f.contains("dom", {c, d}));
    EXPECT_TRUE(f.contains("pdom", {d, "0x0"}));
    EXPECT_FALSE(f.contains("pdom", {b, "0x0"}));
    check_dominance_against_oracle(cfg);
}

TEST(Dominators, FactorialEntryDominatesAll)
{
    const auto cfg = decompile(fixture("factorial.asm")).cfg;
    const auto f = compute_dominators(cfg);
    for (auto l : cfg.labels())
        EXPECT_TRUE(f.contains("dom", {"0x0", pc_hex(l)})) << pc_hex(l);
    check_dominance_against_oracle(cfg);
}

TEST(Dominators, UnreachableBlocksTakeNoPart)
{
    const auto cfg = decompile(Bytes{0x00, 0x5b, 0x00}).cfg;
    const auto f = compute_dominators(cfg);
    EXPECT_FALSE(f.contains("dom", {"0x1", "0x1"}));
    EXPECT_FALSE(f.contains("dom", {"0x0", "0x1"}));
    check_dominance_against_oracle(cfg);
}

TEST(WriteTsv, SortedTabSeparated)
{
    FactBase f;
    f.declare("edge", edb_schema().at("edge"));
    f.declare("entry", edb_schema().at("entry"));
    f.declare("value", edb_schema().at("value"));
    f.insert("edge", {"0x30", "0x33"});
    f.insert("edge", {"0x30", "0x31"});
    f.insert("value", {"V0", "0x60"});
    const auto dir = scratch_dir("sorted");
    write_tsv(f, dir);
    EXPECT_EQ(slurp(dir / "edge.facts"), "0x30\t0x31\n0x30\t0x33\n");
    EXPECT_TRUE(fs::exists(dir / "entry.facts"));
    EXPECT_EQ(fs::file_size(dir / "entry.facts"), 0u);
    EXPECT_EQ(slurp(dir / "value.facts"), "V0\t0x60\n");
    EXPECT_EQ(read_tsv(dir, f.schemas()), f);
}

TEST(WriteTsv, EmptyProgram)
{
    const auto f = facts_of(Bytes{});
    const auto dir = scratch_dir("empty");
    write_tsv(f, dir);
    for (const auto& [name, schema] : edb_schema())
        EXPECT_EQ(fs::file_size(dir / (name + ".facts")), 0u) << name;
}

TEST(WriteTsv, IoFailureNamesPath)
{
    const auto file = scratch_dir("blocker");
    std::ofstream(file) << "x";
    try {
        write_tsv(facts_of(Bytes{0x00}), file / "sub");
        FAIL();
    }
    catch (const fs::filesystem_error& e) {
        EXPECT_NE(std::string(e.what()).find("blocker"), std::string::npos);
    }
}

TEST(ExtractProperty, ClosureConservationDeterminism)
{
    std::mt19937_64 rng(0xfac7);
    for (int i = 0; i < 150; ++i) {
        const auto code = assemble(random_program(rng, 2 + static_cast<int>(rng() % 10)));
        const auto cfg = decompile(code).cfg;
        const auto f = extract_facts(cfg);
        f.validate();

        std::size_t ops = 0;
        for (const auto& [k, b] : cfg.blocks)
            ops += b.ops.size();
        EXPECT_EQ(f.size("op"), ops);

        std::set<std::string> stmts, defined;
        for (const auto& t : f.relation("op"))
            stmts.insert(t[0]);
        for (const auto& t : f.relation("def"))
            defined.insert(t[0]);
        for (const auto& t : f.relation("edge")) {
            EXPECT_TRUE(stmts.contains(t[0]));
            EXPECT_TRUE(stmts.contains(t[1]));
        }
        for (const auto& t : f.relation("use")) {
            EXPECT_TRUE(stmts.contains(t[1]));
            EXPECT_TRUE(defined.contains(t[0]) || t[0].starts_with("S")) << t[0];
        }
        for (const auto& t : f.relation("phi"))
            EXPECT_TRUE(defined.contains(t[1]) || t[1].starts_with("S")) << t[1];

        check_dominance_against_oracle(cfg);

        const auto d1 = scratch_dir("det1");
        const auto d2 = scratch_dir("det2");
        write_tsv(f, d1);
        write_tsv(extract_facts(decompile(code).cfg), d2);
        for (const auto& [name, schema] : edb_schema())
            ASSERT_EQ(slurp(d1 / (name + ".facts")), slurp(d2 / (name + ".facts"))) << name;
    }
}
