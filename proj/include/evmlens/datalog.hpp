// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#pragma once

#include <evmlens/errors.hpp>
#include <evmlens/facts.hpp>

#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

/// Stratified Datalog with negation over symbol tuples.
namespace evmlens::datalog {

struct Term
{
    enum class Kind : unsigned char
    {
        variable,
        constant,
        wildcard,
    };

    Kind kind = Kind::wildcard;
    std::string text;

    Term() = default;

    /// "_" is a wildcard; a name starting with a lowercase letter is a variable;
    /// anything else ("0x0", "CALLER") is a constant.
    Term(const char* s);  // NOLINT(google-explicit-constructor)
    Term(const std::string& s) : Term(s.c_str()) {}  // NOLINT(google-explicit-constructor)

    static Term var(std::string name) { return {Kind::variable, std::move(name)}; }
    static Term constant(std::string value) { return {Kind::constant, std::move(value)}; }
    static Term any() { return {}; }

    bool is_var() const noexcept { return kind == Kind::variable; }
    bool is_const() const noexcept { return kind == Kind::constant; }
    bool is_wildcard() const noexcept { return kind == Kind::wildcard; }

    friend bool operator==(const Term&, const Term&) = default;

private:
    Term(Kind k, std::string t) : kind(k), text(std::move(t)) {}
};

struct Atom
{
    std::string relation;
    std::vector<Term> terms;
    bool negated = false;

    Atom operator!() const
    {
        Atom a = *this;
        a.negated = !a.negated;
        return a;
    }
};

Atom atom(std::string relation, std::vector<Term> terms);

/// `lhs = rhs` or `lhs != rhs` over bound terms.
struct Constraint
{
    Term lhs;
    Term rhs;
    bool equal = true;
};

Constraint eq(Term lhs, Term rhs);
Constraint ne(Term lhs, Term rhs);

using Literal = std::variant<Atom, Constraint>;

struct Rule
{
    Atom head;
    std::vector<Atom> body;
    std::vector<Constraint> constraints;
};

std::string to_string(const Rule& rule);

struct Program
{
    std::map<std::string, RelationSchema, std::less<>> declarations;
    std::vector<Rule> rules;
    std::set<std::string> inputs;
    std::set<std::string> outputs;

    Program& input(const std::string& name, RelationSchema schema);
    Program& relation(const std::string& name, RelationSchema schema);
    Program& output(const std::string& name, RelationSchema schema);
    Program& rule(Atom head, std::vector<Literal> body);

    /// Undeclared relations, arity mismatches, rules defining inputs, negated
    /// heads and range-restriction violations raise ProgramError.
    void validate() const;
};

class ProgramError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// A cycle through negation; `cycle()` lists the relations involved.
class UnstratifiableError : public ProgramError
{
public:
    explicit UnstratifiableError(std::vector<std::string> cycle);
    const std::vector<std::string>& cycle() const noexcept { return cycle_; }

private:
    std::vector<std::string> cycle_;
};

struct Stratum
{
    std::set<std::string> relations;
    /// Indices into Program::rules.
    std::vector<std::size_t> rules;
};

/// Strata in evaluation order: anything a stratum negates is complete before it runs.
std::vector<Stratum> stratify(const Program& program);

/// Semi-naive bottom-up evaluation; returns exactly the declared outputs.
/// EDB relations missing from `edb` are empty; schema mismatches raise SchemaError.
/// Throws Timeout once `deadline` has passed.
FactBase evaluate(const Program& program, const FactBase& edb, Deadline deadline = {});

/// Full re-derivation each round with nested-loop scans. Reference implementation.
FactBase naive_evaluate(const Program& program, const FactBase& edb);

}  // namespace evmlens::datalog
