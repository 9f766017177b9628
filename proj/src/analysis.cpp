// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#include <evmlens/analysis.hpp>
#include <evmlens/extract.hpp>
#include <evmlens/word.hpp>

#include <algorithm>

namespace evmlens {

using datalog::atom;
using datalog::eq;
using datalog::ne;
using datalog::Program;
using datalog::Term;

std::string_view to_string(Analysis a)
{
    switch (a) {
    case Analysis::unchecked_send:
        return "UncheckedSend";
    case Analysis::reentrancy:
        return "Reentrancy";
    case Analysis::unsecured_balance:
        return "UnsecuredBalance";
    case Analysis::destroyable:
        return "Destroyable";
    case Analysis::origin_used:
        return "OriginUsed";
    }
    return "?";
}

std::optional<Analysis> analysis_from_string(std::string_view name)
{
    for (auto a : all_analyses) {
        if (to_string(a) == name)
            return a;
    }
    return std::nullopt;
}

std::string Witness::to_string() const
{
    std::string s = relation + "(";
    for (std::size_t i = 0; i < tuple.size(); ++i)
        s += (i ? ", " : "") + tuple[i];
    return s + ")";
}

namespace {

using enum ColumnType;

const RelationSchema S{{statement}};
const RelationSchema V{{variable}};
const RelationSchema O{{opcode}};
const RelationSchema K{{value}};
const RelationSchema SS{{statement, statement}};
const RelationSchema SV{{statement, variable}};
const RelationSchema VS{{variable, statement}};
const RelationSchema VV{{variable, variable}};
const RelationSchema VO{{variable, opcode}};
const RelationSchema VK{{variable, value}};
const RelationSchema SK{{statement, value}};
const RelationSchema SKS{{statement, value, statement}};

void opcode_set(Program& p, const std::string& name, std::initializer_list<const char*> ops)
{
    p.relation(name, O);
    for (const char* o : ops)
        p.rule(atom(name, {Term::constant(o)}), {});
}

const std::vector<std::string> library_outputs{
    "op_def", "source", "flow", "depends", "dep0",
    "blockEdge", "reachableBlock", "jumpiBlock", "cdep", "cdepStar", "controlsWith",
    "callResult", "throwing", "resultControls", "checkedCallThrows", "checkedCallStateUpdate",
    "gassy", "keyedSload", "guardKey", "setBefore", "clearAfter", "protectedByLoc",
    "otherSource", "fromCallValue",
    "authDep", "inputDep", "guarded0", "writableStorage", "writableDep", "manip",
    "nonConstManipulable", "uncontrolledDep", "bypassable", "strongGuard",
    "inaccessibleBlock", "inaccessible", "usedInStateOrCond",
};

std::map<std::string, RelationSchema, std::less<>> all_schemas()
{
    auto m = library_program().declarations;
    return m;
}

Program analysis_program(const std::string& output, const std::vector<std::string>& inputs)
{
    const auto schemas = all_schemas();
    Program p;
    for (const auto& name : inputs)
        p.input(name, schemas.at(name));
    p.output(output, S);
    return p;
}

std::vector<Tuple> tuples_with(const FactBase& f, const std::string& rel, std::size_t col,
                               const std::string& v, std::size_t limit = 4)
{
    std::vector<Tuple> out;
    if (!f.declared(rel))
        return out;
    for (const auto& t : f.relation(rel)) {
        if (t[col] == v) {
            out.push_back(t);
            if (out.size() == limit)
                break;
        }
    }
    return out;
}

std::string opcode_of(const FactBase& f, const std::string& stmt)
{
    auto t = tuples_with(f, "op", 0, stmt, 1);
    return t.empty() ? "" : t[0][1];
}

std::uint64_t pc_value(const std::string& stmt)
{
    return std::stoull(stmt.substr(2), nullptr, 16);
}

template <typename WitnessFn>
std::vector<Finding> collect(Analysis a, const FactBase& facts, const FactBase& result,
                             const std::string& rel, WitnessFn&& witness)
{
    std::vector<Finding> out;
    for (const auto& t : result.relation(rel)) {
        Finding f{a, t[0], opcode_of(facts, t[0]), {}};
        witness(f);
        out.push_back(std::move(f));
    }
    std::sort(out.begin(), out.end(),
              [](const Finding& x, const Finding& y) { return pc_value(x.stmt) < pc_value(y.stmt); });
    return out;
}

void add(Finding& f, const std::string& rel, const std::vector<Tuple>& ts)
{
    for (const auto& t : ts)
        f.witness.push_back({rel, t});
}

}  // namespace

Program library_program()
{
    Program p;
    for (const auto& [name, schema] : edb_schema())
        p.input(name, schema);
    p.input("gas_above_stipend", V);

    // Pure value computations; everything else that defines a variable is a source.
    opcode_set(p, "computed_op",
               {"CONST", "ADD", "MUL", "SUB", "DIV", "SDIV", "MOD", "SMOD", "ADDMOD", "MULMOD", "EXP",
                "SIGNEXTEND", "LT", "GT", "SLT", "SGT", "EQ", "ISZERO", "AND", "OR", "XOR", "NOT",
                "BYTE", "SHA3"});
    opcode_set(p, "data_input_op", {"CALLDATALOAD", "CALLDATASIZE", "CALLVALUE"});
    opcode_set(p, "auth_op", {"CALLER", "ORIGIN"});
    opcode_set(p, "throw_op", {"REVERT", "INVALID"});

    for (const auto& name : library_outputs) {
        static const std::map<std::string, RelationSchema> shapes{
            {"op_def", VO}, {"source", V}, {"flow", VV}, {"depends", VV}, {"dep0", VV},
            {"blockEdge", SS}, {"reachableBlock", S}, {"jumpiBlock", SV}, {"cdep", SS},
            {"cdepStar", SS}, {"controlsWith", SV}, {"callResult", VS}, {"throwing", S},
            {"resultControls", SS}, {"checkedCallThrows", S}, {"checkedCallStateUpdate", S},
            {"gassy", SV}, {"keyedSload", VK}, {"guardKey", SK}, {"setBefore", SKS},
            {"clearAfter", SKS}, {"protectedByLoc", SK}, {"otherSource", V},
            {"fromCallValue", V}, {"authDep", V}, {"inputDep", V}, {"guarded0", S},
            {"writableStorage", K}, {"writableDep", V}, {"manip", V},
            {"nonConstManipulable", V}, {"uncontrolledDep", V}, {"bypassable", V},
            {"strongGuard", V}, {"inaccessibleBlock", S}, {"inaccessible", S},
            {"usedInStateOrCond", VS},
        };
        p.output(name, shapes.at(name));
    }

    const Term _ = Term::any();

    // Data dependence, kept rooted at source variables: depends(x, y) means the value
    // of x is computed from the source y. Over-approximates (operands, phi merges);
    // memory and storage round trips are not followed.
    p.rule(atom("op_def", {"v", "o"}), {atom("def", {"v", "s"}), atom("op", {"s", "o"})});
    p.rule(atom("source", {"v"}), {atom("op_def", {"v", "o"}), !atom("computed_op", {"o"})});
    p.rule(atom("flow", {"x", "y"}), {atom("def", {"x", "s"}), atom("use", {"y", "s", _})});
    p.rule(atom("flow", {"x", "y"}), {atom("phi", {"x", "y"})});
    p.rule(atom("depends", {"x", "y"}), {atom("flow", {"x", "y"}), atom("source", {"y"})});
    p.rule(atom("depends", {"x", "z"}), {atom("flow", {"x", "y"}), atom("depends", {"y", "z"})});
    p.rule(atom("dep0", {"x", "y"}), {atom("depends", {"x", "y"})});
    p.rule(atom("dep0", {"y", "y"}), {atom("source", {"y"})});

    // Control flow between blocks and control dependence (post-dominance frontier).
    p.rule(atom("blockEdge", {"a", "b"}), {atom("edge", {"h", "t"}), atom("block", {"h", "a"}),
                                           atom("block", {"t", "b"}),
                                           !atom("in_block_before", {"h", "t"})});
    p.rule(atom("reachableBlock", {"b"}), {atom("entry", {"s"}), atom("block", {"s", "b"})});
    p.rule(atom("reachableBlock", {"b"}),
           {atom("reachableBlock", {"a"}), atom("blockEdge", {"a", "b"})});
    p.rule(atom("jumpiBlock", {"j", "c"}), {atom("op_JUMPI", {"s", _, "c"}), atom("block", {"s", "j"})});
    p.rule(atom("cdep", {"b", "j"}), {atom("jumpiBlock", {"j", _}), atom("blockEdge", {"j", "c"}),
                                      atom("pdom", {"b", "c"}), !atom("pdom", {"b", "j"})});
    p.rule(atom("cdepStar", {"b", "j"}), {atom("cdep", {"b", "j"})});
    p.rule(atom("cdepStar", {"b", "k"}), {atom("cdep", {"b", "j"}), atom("cdepStar", {"j", "k"})});
    p.rule(atom("controlsWith", {"s", "v"}), {atom("block", {"s", "b"}), atom("cdepStar", {"b", "j"}),
                                              atom("jumpiBlock", {"j", "v"})});

    // Call results and what is done with them.
    p.rule(atom("callResult", {"v", "c"}), {atom("op", {"c", "CALL"}), atom("def", {"v", "c"})});
    p.rule(atom("throwing", {"s"}), {atom("op", {"s", "o"}), atom("throw_op", {"o"})});
    p.rule(atom("throwing", {"s"}), {atom("invalid_jump", {"s"})});
    p.rule(atom("resultControls", {"c", "j"}), {atom("callResult", {"r", "c"}), atom("dep0", {"v", "r"}),
                                                atom("jumpiBlock", {"j", "v"})});
    p.rule(atom("checkedCallThrows", {"c"}),
           {atom("resultControls", {"c", "j"}), atom("cdepStar", {"b", "j"}), atom("block", {"t", "b"}),
            atom("throwing", {"t"})});
    p.rule(atom("checkedCallStateUpdate", {"c"}),
           {atom("resultControls", {"c", "j"}), atom("cdepStar", {"b", "j"}), atom("block", {"s", "b"}),
            atom("op", {"s", "SSTORE"})});
    p.rule(atom("checkedCallStateUpdate", {"c"}),
           {atom("callResult", {"r", "c"}), atom("dep0", {"v", "r"}), atom("sstore", {_, "v", _})});
    p.rule(atom("checkedCallStateUpdate", {"c"}),
           {atom("callResult", {"r", "c"}), atom("dep0", {"v", "r"}), atom("sstore", {_, _, "v"})});

    // Gas forwarded to a CALL: derived from GAS, or a constant above the stipend.
    p.rule(atom("gassy", {"s", "g"}), {atom("op_CALL", {"s", "g", _, _, _, _, _, _}),
                                       atom("dep0", {"g", "y"}), atom("op_def", {"y", "GAS"})});
    p.rule(atom("gassy", {"s", "g"}), {atom("op_CALL", {"s", "g", _, _, _, _, _, _}),
                                       atom("gas_above_stipend", {"g"})});

    // Storage mutex: a CALL guarded by a condition on SLOAD k, with an SSTORE to k
    // dominating it and a different SSTORE to k post-dominating it.
    p.rule(atom("keyedSload", {"l", "k"}), {atom("sload", {_, "key", "l"}), atom("value", {"key", "k"})});
    p.rule(atom("guardKey", {"s", "k"}), {atom("op_CALL", {"s", _, _, _, _, _, _, _}),
                                          atom("controlsWith", {"s", "v"}), atom("dep0", {"v", "l"}),
                                          atom("keyedSload", {"l", "k"})});
    p.rule(atom("setBefore", {"s", "k", "w"}),
           {atom("guardKey", {"s", "k"}), atom("sstore", {"w", "key", _}), atom("value", {"key", "k"}),
            atom("block", {"w", "bw"}), atom("block", {"s", "b"}), atom("dom", {"bw", "b"}), ne("bw", "b")});
    p.rule(atom("setBefore", {"s", "k", "w"}),
           {atom("guardKey", {"s", "k"}), atom("sstore", {"w", "key", _}), atom("value", {"key", "k"}),
            atom("in_block_before", {"w", "s"})});
    p.rule(atom("clearAfter", {"s", "k", "w"}),
           {atom("guardKey", {"s", "k"}), atom("sstore", {"w", "key", _}), atom("value", {"key", "k"}),
            atom("block", {"w", "bw"}), atom("block", {"s", "b"}), atom("pdom", {"bw", "b"}), ne("bw", "b")});
    p.rule(atom("clearAfter", {"s", "k", "w"}),
           {atom("guardKey", {"s", "k"}), atom("sstore", {"w", "key", _}), atom("value", {"key", "k"}),
            atom("in_block_before", {"s", "w"})});
    p.rule(atom("protectedByLoc", {"s", "k"}),
           {atom("setBefore", {"s", "k", "w1"}), atom("clearAfter", {"s", "k", "w2"}), ne("w1", "w2")});

    // Values that are nothing but the incoming call value.
    p.rule(atom("otherSource", {"v"}),
           {atom("dep0", {"v", "y"}), atom("op_def", {"y", "o"}), ne("o", "CALLVALUE")});
    p.rule(atom("fromCallValue", {"v"}), {atom("dep0", {"v", "y"}), atom("op_def", {"y", "CALLVALUE"}),
                                          !atom("otherSource", {"v"})});

    // Who can influence what. Storage slot k is caller-writable when some reachable
    // SSTORE to constant key k is not behind a CALLER/ORIGIN check.
    p.rule(atom("authDep", {"v"}), {atom("dep0", {"v", "y"}), atom("op_def", {"y", "o"}),
                                    atom("auth_op", {"o"})});
    p.rule(atom("inputDep", {"v"}), {atom("dep0", {"v", "y"}), atom("op_def", {"y", "o"}),
                                     atom("data_input_op", {"o"})});
    p.rule(atom("guarded0", {"s"}), {atom("controlsWith", {"s", "v"}), atom("authDep", {"v"})});
    p.rule(atom("writableStorage", {"k"}),
           {atom("sstore", {"s", "key", _}), atom("value", {"key", "k"}), atom("block", {"s", "b"}),
            atom("reachableBlock", {"b"}), !atom("guarded0", {"s"})});
    p.rule(atom("writableDep", {"v"}), {atom("dep0", {"v", "l"}), atom("keyedSload", {"l", "k"}),
                                        atom("writableStorage", {"k"})});
    p.rule(atom("manip", {"v"}), {atom("inputDep", {"v"})});
    p.rule(atom("manip", {"v"}), {atom("authDep", {"v"})});
    p.rule(atom("manip", {"v"}), {atom("writableDep", {"v"})});
    p.rule(atom("nonConstManipulable", {"v"}), {atom("manip", {"v"}), !atom("value", {"v", _})});

    // A guard is strong when its condition rests on the caller's identity or on storage
    // the caller cannot write, and on nothing the caller supplies.
    p.rule(atom("uncontrolledDep", {"v"}), {atom("authDep", {"v"})});
    p.rule(atom("uncontrolledDep", {"v"}), {atom("dep0", {"v", "l"}), atom("keyedSload", {"l", "k"}),
                                            !atom("writableStorage", {"k"})});
    p.rule(atom("bypassable", {"v"}), {atom("inputDep", {"v"})});
    p.rule(atom("bypassable", {"v"}), {atom("writableDep", {"v"})});
    p.rule(atom("strongGuard", {"v"}), {atom("jumpiBlock", {_, "v"}), atom("uncontrolledDep", {"v"}),
                                        !atom("bypassable", {"v"})});
    p.rule(atom("inaccessibleBlock", {"b"}), {atom("block", {_, "b"}), !atom("reachableBlock", {"b"})});
    p.rule(atom("inaccessibleBlock", {"b"}), {atom("cdepStar", {"b", "j"}), atom("jumpiBlock", {"j", "v"}),
                                              atom("strongGuard", {"v"})});
    p.rule(atom("inaccessible", {"s"}), {atom("block", {"s", "b"}), atom("inaccessibleBlock", {"b"})});

    p.rule(atom("usedInStateOrCond", {"v", "s"}), {atom("sstore", {"s", "v", _})});
    p.rule(atom("usedInStateOrCond", {"v", "s"}), {atom("sstore", {"s", _, "v"})});
    p.rule(atom("usedInStateOrCond", {"v", "s"}), {atom("op_JUMPI", {"s", _, "v"})});
    return p;
}

FactBase build_library_relations(const FactBase& edb, Deadline deadline)
{
    for (const auto& [name, schema] : edb_schema()) {
        if (!edb.declared(name))
            throw SchemaError(name, "missing input relation");
        if (!(edb.schema(name) == schema))
            throw SchemaError(name, "input relation has the wrong column layout");
    }
    FactBase in = edb;
    in.declare("gas_above_stipend", V);
    for (const auto& t : edb.relation("value")) {
        if (word_from_hex(t[1]) > gas_stipend)
            in.insert("gas_above_stipend", {t[0]});
    }
    return datalog::evaluate(library_program(), in, deadline);
}

std::vector<Finding> analyze_unchecked_send(const FactBase& facts)
{
    auto p = analysis_program("uncheckedCall",
                              {"callResult", "checkedCallThrows", "checkedCallStateUpdate"});
    p.rule(atom("uncheckedCall", {"u"}), {atom("callResult", {"_", "u"}),
                                          !atom("checkedCallThrows", {"u"}),
                                          !atom("checkedCallStateUpdate", {"u"})});
    const auto result = datalog::evaluate(p, facts);
    return collect(Analysis::unchecked_send, facts, result, "uncheckedCall", [&](Finding& f) {
        add(f, "callResult", tuples_with(facts, "callResult", 1, f.stmt));
    });
}

std::vector<Finding> analyze_reentrancy(const FactBase& facts)
{
    auto p = analysis_program("reentrantCall", {"op", "protectedByLoc", "gassy", "op_CALL"});
    p.rule(atom("reentrantCall", {"stmt"}),
           {atom("op", {"stmt", "CALL"}), !atom("protectedByLoc", {"stmt", "_"}),
            atom("gassy", {"stmt", "gasVar"}),
            atom("op_CALL", {"stmt", "gasVar", "_", "_", "_", "_", "_", "_"})});
    const auto result = datalog::evaluate(p, facts);
    return collect(Analysis::reentrancy, facts, result, "reentrantCall", [&](Finding& f) {
        add(f, "gassy", tuples_with(facts, "gassy", 0, f.stmt));
        add(f, "op_CALL", tuples_with(facts, "op_CALL", 0, f.stmt));
    });
}

std::vector<Finding> analyze_unsecured_balance(const FactBase& facts)
{
    auto p = analysis_program("unsecuredValueSend", {"op_CALL", "nonConstManipulable", "def", "value",
                                                     "fromCallValue", "inaccessible"});
    p.rule(atom("unsecuredValueSend", {"stmt"}),
           {atom("op_CALL", {"stmt", "_", "target", "val", "_", "_", "_", "_"}),
            atom("nonConstManipulable", {"target"}), atom("def", {"val", "_"}),
            !atom("value", {"val", "0x0"}), !atom("fromCallValue", {"val"}),
            !atom("inaccessible", {"stmt"})});
    const auto result = datalog::evaluate(p, facts);
    return collect(Analysis::unsecured_balance, facts, result, "unsecuredValueSend", [&](Finding& f) {
        const auto call = tuples_with(facts, "op_CALL", 0, f.stmt, 1);
        add(f, "op_CALL", call);
        if (!call.empty())
            add(f, "nonConstManipulable", tuples_with(facts, "nonConstManipulable", 0, call[0][2], 1));
    });
}

std::vector<Finding> analyze_destroyable(const FactBase& facts)
{
    auto p = analysis_program("destroyable", {"op", "inaccessible"});
    p.rule(atom("destroyable", {"stmt"}),
           {!atom("inaccessible", {"stmt"}), atom("op", {"stmt", "SELFDESTRUCT"})});
    const auto result = datalog::evaluate(p, facts);
    return collect(Analysis::destroyable, facts, result, "destroyable", [&](Finding& f) {
        add(f, "op", tuples_with(facts, "op", 0, f.stmt, 1));
        for (const auto& b : tuples_with(facts, "block", 0, f.stmt, 1))
            add(f, "reachableBlock", tuples_with(facts, "reachableBlock", 0, b[1], 1));
    });
}

std::vector<Finding> analyze_origin(const FactBase& facts)
{
    auto p = analysis_program("originUsed", {"op", "def", "depends", "usedInStateOrCond"});
    p.rule(atom("originUsed", {"stmt"}),
           {atom("op", {"stmt", "ORIGIN"}), atom("def", {"originVar", "stmt"}),
            atom("depends", {"useVar", "originVar"}), atom("usedInStateOrCond", {"useVar", "_"})});
    // The ORIGIN result itself reaching a condition or SSTORE, with no operation in between.
    p.rule(atom("originUsed", {"stmt"}),
           {atom("op", {"stmt", "ORIGIN"}), atom("def", {"originVar", "stmt"}),
            atom("usedInStateOrCond", {"originVar", "_"})});
    const auto result = datalog::evaluate(p, facts);
    return collect(Analysis::origin_used, facts, result, "originUsed", [&](Finding& f) {
        const auto defs = tuples_with(facts, "def", 1, f.stmt, 1);
        add(f, "def", defs);
        if (defs.empty())
            return;
        const auto& origin = defs[0][0];
        std::set<std::string> users{origin};
        for (const auto& d : tuples_with(facts, "depends", 1, origin, 64))
            users.insert(d[0]);
        for (const auto& u : users) {
            const auto uses = tuples_with(facts, "usedInStateOrCond", 0, u, 1);
            if (uses.empty())
                continue;
            if (u != origin)
                f.witness.push_back({"depends", {u, origin}});
            add(f, "usedInStateOrCond", uses);
            break;
        }
    });
}

std::vector<Finding> analyze(Analysis which, const FactBase& facts)
{
    switch (which) {
    case Analysis::unchecked_send:
        return analyze_unchecked_send(facts);
    case Analysis::reentrancy:
        return analyze_reentrancy(facts);
    case Analysis::unsecured_balance:
        return analyze_unsecured_balance(facts);
    case Analysis::destroyable:
        return analyze_destroyable(facts);
    case Analysis::origin_used:
        return analyze_origin(facts);
    }
    return {};
}

std::vector<Finding> run_analyses(const FactBase& edb, const std::set<Analysis>& which,
                                  Deadline deadline)
{
    FactBase facts = edb;
    facts.merge(build_library_relations(edb, deadline));
    std::vector<Finding> out;
    for (auto a : all_analyses) {
        if (!which.contains(a))
            continue;
        if (deadline && std::chrono::steady_clock::now() > *deadline)
            throw Timeout("analysis passed its deadline");
        auto found = analyze(a, facts);
        out.insert(out.end(), std::make_move_iterator(found.begin()),
                   std::make_move_iterator(found.end()));
    }
    return out;
}

}  // namespace evmlens
