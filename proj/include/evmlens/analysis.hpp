// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#pragma once

#include <evmlens/datalog.hpp>
#include <evmlens/facts.hpp>

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace evmlens {

enum class Analysis : unsigned char
{
    unchecked_send,
    reentrancy,
    unsecured_balance,
    destroyable,
    origin_used,
};

inline constexpr Analysis all_analyses[] = {Analysis::unchecked_send, Analysis::reentrancy,
                                            Analysis::unsecured_balance, Analysis::destroyable,
                                            Analysis::origin_used};

/// "UncheckedSend", "Reentrancy", "UnsecuredBalance", "Destroyable", "OriginUsed".
std::string_view to_string(Analysis a);
std::optional<Analysis> analysis_from_string(std::string_view name);

struct Witness
{
    std::string relation;
    Tuple tuple;

    std::string to_string() const;
    friend bool operator==(const Witness&, const Witness&) = default;
};

struct Finding
{
    Analysis analysis;
    std::string stmt;
    std::string opcode;
    std::vector<Witness> witness;

    friend bool operator==(const Finding&, const Finding&) = default;
};

/// Statements whose CALL gas operand may carry a constant above the send/transfer stipend.
inline constexpr unsigned gas_stipend = 2300;

/// The shared relation library (dependence, control dependence, guards, call shapes).
datalog::Program library_program();

/// Evaluates library_program() over an extracted EDB. Throws SchemaError when an
/// EDB relation is missing or has the wrong shape.
FactBase build_library_relations(const FactBase& edb, Deadline deadline = {});

/// Each takes the EDB merged with the library IDB.
std::vector<Finding> analyze_unchecked_send(const FactBase& facts);
std::vector<Finding> analyze_reentrancy(const FactBase& facts);
std::vector<Finding> analyze_unsecured_balance(const FactBase& facts);
std::vector<Finding> analyze_destroyable(const FactBase& facts);
std::vector<Finding> analyze_origin(const FactBase& facts);

std::vector<Finding> analyze(Analysis which, const FactBase& facts);

/// Library plus the selected analyses over one EDB, findings ordered by analysis then pc.
std::vector<Finding> run_analyses(const FactBase& edb,
                                  const std::set<Analysis>& which = {std::begin(all_analyses),
                                                                     std::end(all_analyses)},
                                  Deadline deadline = {});

}  // namespace evmlens
