// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#pragma once

#include <evmlens/isa.hpp>
#include <evmlens/tir.hpp>

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace evmlens {

struct DecompilerConfig
{
    std::chrono::milliseconds timeout{60'000};
    /// Bound on outer (edge discovery) rounds of a single fixed-point solve.
    std::size_t max_iterations = 100'000;
    /// Constant-set size before widening to Top.
    std::size_t const_set_cap = 32;
    /// Block instances after splitting may not exceed this multiple of the original count.
    std::size_t clone_budget = 10;
    bool split_nodes = true;
    /// Absolute wall-clock deadline; decompile() derives it from `timeout` when unset.
    std::optional<std::chrono::steady_clock::time_point> deadline;
};

struct Cfg
{
    std::map<BlockKey, TIRBlock> blocks;
    BlockKey entry{0, 0};
    /// Pcs of JUMP/JUMPI statements whose destination stayed Top or Bottom.
    std::set<std::uint64_t> unresolved;
    /// Splitting refused (precondition failed or budget exhausted).
    std::set<BlockKey> split_refused;
    /// Per-instance override of which instance a jump or fall-through to a pc reaches.
    std::map<std::pair<BlockKey, std::uint64_t>, BlockKey> routes;
    std::uint32_t next_clone_tag = 1;
    std::size_t original_block_count = 0;
    std::size_t const_set_cap = 32;
    std::size_t iterations = 0;
    bool bounded = false;
    bool timed_out = false;

    const TIRBlock* find(BlockKey key) const;
    /// Merged-block lookup by its label (first statement pc).
    const TIRBlock* find_label(std::uint64_t label) const;
    std::set<std::uint64_t> labels() const;
    std::set<std::pair<std::uint64_t, std::uint64_t>> label_edges() const;
    bool has_clones() const;
};

/// Symbolic execution of every basic block of the listing, registers numbered in pc order.
std::vector<TIRBlock> lift_blocks(const DisassemblyListing& listing);

/// Runs the jump-resolving constant propagation to a fixed point over the given blocks.
Cfg build_cfg(std::vector<TIRBlock> blocks, const DecompilerConfig& config);

/// Clones the single-predecessor path from `key` back to its nearest multi-predecessor
/// ancestor once per ancestor predecessor, then re-solves. Returns the input with `key`
/// marked refused when the precondition or the clone budget fails.
Cfg split_node(Cfg cfg, BlockKey key, const DecompilerConfig& config);

/// Collapses clones back to one block per pc, unioning edges, targets and values.
Cfg merge_clones(const Cfg& cfg);

struct Decompilation
{
    DisassemblyListing listing;
    Cfg cfg;
    bool timed_out() const noexcept { return cfg.timed_out; }
};

Decompilation decompile(std::span<const std::uint8_t> code, DecompilerConfig config = {});

/// TIR text: `0x<pc>: <lhs> = <OP> <args>` or `0x<pc>: <OP> <args>`, one block per paragraph.
std::string format_tir(const Cfg& cfg);
std::string format_op(const TIRBlock& block, const TIROp& op);

/// Graphviz digraph, one node per block labelled with its TIR.
std::string format_dot(const Cfg& cfg);

}  // namespace evmlens
