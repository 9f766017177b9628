// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#include <evmlens/analysis.hpp>
#include <evmlens/extract.hpp>

#include "asm.hpp"
#include "gen.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace evmlens;
using evmlens::testing::assemble;
using evmlens::testing::random_program;
using evmlens::testing::read_file;

namespace {

Cfg cfg_of(const std::string& name)
{
    auto src = read_file(std::string(EVMLENS_FIXTURE_DIR) + "/contracts/" + name + ".asm");
    return decompile(assemble(src)).cfg;
}

FactBase edb_of(const std::string& name)
{
    return extract_facts(cfg_of(name));
}

std::size_t count(const std::vector<Finding>& fs, Analysis a)
{
    return std::count_if(fs.begin(), fs.end(), [&](const Finding& f) { return f.analysis == a; });
}

std::vector<Finding> findings_of(const std::string& name)
{
    return run_analyses(edb_of(name));
}

std::string stmt_of(const FactBase& edb, const std::string& opcode)
{
    for (const auto& t : edb.relation("op"))
        if (t[1] == opcode)
            return t[0];
    return {};
}

FactBase with_library(const FactBase& edb)
{
    FactBase all = edb;
    all.merge(build_library_relations(edb));
    return all;
}

struct Pair
{
    Analysis analysis;
    const char* vulnerable;
    const char* safe;
};

const Pair pairs[] = {
    {Analysis::unchecked_send, "unchecked_send_vulnerable", "unchecked_send_safe"},
    {Analysis::reentrancy, "reentrancy_vulnerable", "reentrancy_safe"},
    {Analysis::unsecured_balance, "unsecured_balance_vulnerable", "unsecured_balance_safe"},
    {Analysis::destroyable, "destroyable_vulnerable", "destroyable_safe"},
    {Analysis::origin_used, "origin_vulnerable", "origin_safe"},
};

const char* all_fixtures[] = {
    "checked_call",         "destroyable_safe",        "destroyable_vulnerable",
    "no_calls",             "origin_logged",           "origin_safe",
    "origin_stored",        "origin_vulnerable",       "reentrancy_const_gas",
    "reentrancy_safe",      "reentrancy_stipend",      "reentrancy_vulnerable",
    "unchecked_send_safe",  "unchecked_send_stored",   "unchecked_send_vulnerable",
    "unsecured_balance_safe", "unsecured_balance_vulnerable", "zero_value_call",
};

}  // namespace

TEST(AnalysisNames, RoundTrip)
{
    for (auto a : all_analyses)
        EXPECT_EQ(analysis_from_string(to_string(a)), a);
    EXPECT_EQ(to_string(Analysis::origin_used), "OriginUsed");
    EXPECT_FALSE(analysis_from_string("Overflow"));
}

TEST(PairDiscipline, VulnerableFlaggedSafeClean)
{
    for (const auto& p : pairs) {
        SCOPED_TRACE(p.vulnerable);
        EXPECT_GE(count(findings_of(p.vulnerable), p.analysis), 1u);
        EXPECT_EQ(count(findings_of(p.safe), p.analysis), 0u);
    }
}

TEST(UncheckedSend, ResultStoredCountsAsChecked)
{
    EXPECT_EQ(count(findings_of("unchecked_send_stored"), Analysis::unchecked_send), 0u);
}

TEST(UncheckedSend, InvalidJumpThrowCountsAsChecked)
{
    auto edb = edb_of("checked_call");
    auto all = with_library(edb);
    auto call = stmt_of(edb, "CALL");
    ASSERT_EQ(call, "0xb");
    EXPECT_TRUE(all.contains("checkedCallThrows", {call}));
    EXPECT_EQ(count(run_analyses(edb), Analysis::unchecked_send), 0u);
}

TEST(UncheckedSend, NoCallsNoFindings)
{
    EXPECT_TRUE(findings_of("no_calls").empty());
}

TEST(Reentrancy, StipendGasIsNotGassy)
{
    EXPECT_EQ(count(findings_of("reentrancy_stipend"), Analysis::reentrancy), 0u);
}

TEST(Reentrancy, ConstantGasAboveStipendIsGassy)
{
    EXPECT_EQ(count(findings_of("reentrancy_const_gas"), Analysis::reentrancy), 1u);
}

TEST(Reentrancy, MutexProtectsCallOnKeyZero)
{
    auto edb = edb_of("reentrancy_safe");
    auto all = with_library(edb);
    auto call = stmt_of(edb, "CALL");
    ASSERT_FALSE(call.empty());
    EXPECT_TRUE(all.contains("protectedByLoc", {call, "0x0"}));
    EXPECT_TRUE(all.relation("gassy").size() > 0);
}

TEST(UnsecuredBalance, ZeroValueCallNotFlagged)
{
    EXPECT_EQ(count(findings_of("zero_value_call"), Analysis::unsecured_balance), 0u);
}

TEST(Origin, LoggedOnlyNotFlagged)
{
    EXPECT_TRUE(findings_of("origin_logged").empty());
}

TEST(Origin, StoredOriginFlagged)
{
    auto fs = findings_of("origin_stored");
    ASSERT_EQ(count(fs, Analysis::origin_used), 1u);
    EXPECT_EQ(fs[0].opcode, "ORIGIN");
}

TEST(Origin, WitnessNamesTheUse)
{
    auto fs = run_analyses(edb_of("origin_vulnerable"), {Analysis::origin_used});
    ASSERT_EQ(fs.size(), 1u);
    auto has = [&](const std::string& rel) {
        return std::any_of(fs[0].witness.begin(), fs[0].witness.end(),
                           [&](const Witness& w) { return w.relation == rel; });
    };
    EXPECT_TRUE(has("def"));
    EXPECT_TRUE(has("usedInStateOrCond"));
}

TEST(Library, OriginFlowsThroughAnd)
{
    auto edb = extract_facts(decompile(assemble(R"(
        ORIGIN
        PUSH20 0xffffffffffffffffffffffffffffffffffffffff
        AND
        PUSH1 0x00
        SSTORE
        STOP
    )")).cfg);
    auto all = with_library(edb);
    // V0 = ORIGIN, V1 = mask, V2 = AND
    EXPECT_TRUE(all.contains("depends", {"V2", "V0"}));
    // constants are not flow sources
    EXPECT_FALSE(all.contains("depends", {"V2", "V1"}));
    EXPECT_FALSE(all.contains("depends", {"V0", "V2"}));
    EXPECT_TRUE(all.contains("usedInStateOrCond", {"V2", "0x19"}));
}

TEST(Library, MissingInputRelationIsSchemaError)
{
    auto edb = edb_of("no_calls");
    FactBase partial;
    for (const auto& [name, schema] : edb.schemas())
        if (name != "op_CALL")
            partial.declare(name, schema);
    try {
        build_library_relations(partial);
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.relation(), "op_CALL");
    }
}

TEST(Library, WrongShapeIsSchemaError)
{
    FactBase bad;
    for (const auto& [name, schema] : edb_schema())
        bad.declare(name, name == "def" ? RelationSchema{{ColumnType::variable}} : schema);
    EXPECT_THROW(build_library_relations(bad), SchemaError);
}

TEST(Library, EmptyProgram)
{
    auto edb = extract_facts(decompile(Bytes{}).cfg);
    EXPECT_TRUE(run_analyses(edb).empty());
}

// Every finding sits on an op of the right kind.
TEST(FindingProperty, StatementOpcodeMatchesAnalysis)
{
    for (const char* name : all_fixtures) {
        SCOPED_TRACE(name);
        auto edb = edb_of(name);
        for (const auto& f : run_analyses(edb)) {
            std::string want = f.analysis == Analysis::destroyable  ? "SELFDESTRUCT"
                               : f.analysis == Analysis::origin_used ? "ORIGIN"
                                                                     : "CALL";
            EXPECT_EQ(f.opcode, want);
            EXPECT_TRUE(edb.contains("op", {f.stmt, want}));
            EXPECT_FALSE(f.witness.empty());
        }
    }
}

// depends is transitive, and without loops nothing depends on itself.
TEST(DependsProperty, TransitiveAndIrreflexiveOnAcyclicCode)
{
    auto check = [](const FactBase& edb, bool acyclic) {
        auto lib = build_library_relations(edb);
        const auto& dep = lib.relation("depends");
        std::map<std::string, std::vector<std::string>> out;
        for (const auto& t : dep)
            out[t[0]].push_back(t[1]);
        for (const auto& t : dep) {
            if (acyclic)
                EXPECT_NE(t[0], t[1]) << "depends(" << t[0] << ", " << t[0] << ")";
            for (const auto& z : out[t[1]])
                EXPECT_TRUE(lib.contains("depends", {t[0], z}))
                    << t[0] << " -> " << t[1] << " -> " << z;
        }
    };
    for (const char* name : all_fixtures) {
        SCOPED_TRACE(name);
        check(edb_of(name), true);
    }
    std::mt19937_64 rng(7);
    for (int i = 0; i < 40; ++i) {
        auto edb = extract_facts(decompile(assemble(random_program(rng, 2 + i % 6))).cfg);
        check(edb, false);
    }
}

// Extra CFG edges only add paths. ORIGIN findings rest on data flow alone, so
// they survive; the guard-based analyses can lose findings when a new edge
// reaches a throw or changes post-dominance (see the counterexample below).
TEST(MonotoneProperty, ExtraEdgesKeepOriginFindings)
{
    std::mt19937_64 rng(11);
    for (const char* name : all_fixtures) {
        SCOPED_TRACE(name);
        auto cfg = cfg_of(name);
        auto base = run_analyses(extract_facts(cfg), {Analysis::origin_used});
        std::vector<BlockKey> keys;
        for (const auto& [k, b] : cfg.blocks)
            keys.push_back(k);
        for (int i = 0; i < 8; ++i) {
            auto g = cfg;
            auto a = keys[rng() % keys.size()];
            auto b = keys[rng() % keys.size()];
            g.blocks.at(a).successors.insert(b);
            g.blocks.at(b).predecessors.insert(a);
            auto widened = run_analyses(extract_facts(g), {Analysis::origin_used});
            for (const auto& f : base) {
                bool kept = std::any_of(widened.begin(), widened.end(),
                                        [&](const Finding& w) { return w.stmt == f.stmt; });
                EXPECT_TRUE(kept) << f.stmt << " lost after edge " << to_string(a) << " -> "
                                  << to_string(b);
            }
        }
    }
}

// checkedCallThrows asks for some path from a result-dependent branch to a throw,
// so a new edge can create one and retract the finding.
TEST(MonotoneProperty, EdgeToThrowCanCheckAnUncheckedSend)
{
    auto cfg = decompile(assemble(R"(
        PUSH1 0x00
        DUP1
        DUP1
        DUP1
        PUSH1 0x64
        CALLER
        PUSH2 0x08fc
        CALL
        PUSH2 @join
        JUMPI
    side:
        JUMPDEST
        PUSH2 @join
        JUMP
    join:
        JUMPDEST
        STOP
    fail:
        JUMPDEST
        PUSH1 0x00
        DUP1
        REVERT
    )")).cfg;
    ASSERT_EQ(count(run_analyses(extract_facts(cfg)), Analysis::unchecked_send), 1u);

    // A third way out of the branch on the call result, into the REVERT.
    const TIRBlock* branch = cfg.find_label(0x0);
    const TIRBlock* fail = cfg.find_label(0x17);
    ASSERT_TRUE(branch && fail);
    auto g = cfg;
    g.blocks.at(branch->key()).successors.insert(fail->key());
    g.blocks.at(fail->key()).predecessors.insert(branch->key());
    EXPECT_EQ(count(run_analyses(extract_facts(g)), Analysis::unchecked_send), 0u);
}
