// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#pragma once

#include <evmlens/cfg.hpp>
#include <evmlens/facts.hpp>

#include <map>
#include <string>

namespace evmlens {

/// Column layout of every relation produced by extract_facts and compute_dominators.
const std::map<std::string, RelationSchema, std::less<>>& edb_schema();

/// Relations describing a merged Cfg: control flow, def/use, opcodes, constant
/// values, memory/storage/call shapes, jump status, plus dom/pdom.
///
/// Entry-stack placeholders are named `S<depth>_<block label>`. A placeholder all of
/// whose predecessors supply the same variable is replaced by it; otherwise it stays
/// and `phi(placeholder, source)` lists the incoming variables.
FactBase extract_facts(const Cfg& cfg);

/// dom(a, b) / pdom(a, b) over block labels, both reflexive. Post-dominance uses a
/// virtual exit `0xEXIT` reached from every block without successors. Blocks
/// unreachable from the entry (or unable to reach the exit, for pdom) take no part.
FactBase compute_dominators(const Cfg& cfg);

}  // namespace evmlens
