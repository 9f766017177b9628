// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#pragma once

#include <evmlens/analysis.hpp>
#include <evmlens/word.hpp>

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace evmlens::cli {

inline constexpr const char* tool_name = "evmlens";
inline constexpr const char* tool_version = "0.1.0";

enum ExitCode : int
{
    exit_clean = 0,
    exit_findings = 1,
    exit_usage = 2,
    exit_error = 3,
    exit_timeout = 4,
};

enum class ReportFormat
{
    json,
    tsv,
    text,
};

struct RunConfig
{
    double timeout_seconds = 60;
    std::size_t max_iterations = 100'000;
    std::size_t const_set_cap = 32;
    std::size_t clone_budget = 10;
    std::optional<std::filesystem::path> output_dir;
    ReportFormat format = ReportFormat::json;
    unsigned jobs = 1;

    nlohmann::ordered_json snapshot() const;
};

enum class Stage
{
    disasm,
    decompile,
    extract,
    analyze,
};

enum class Status
{
    success,
    timeout,
    error,
};

std::string_view to_string(Status s);

struct ContractResult
{
    std::string name;
    Status status = Status::success;
    std::string message;  ///< error or timeout detail
    std::vector<Finding> findings;
    std::chrono::milliseconds elapsed{0};

    // Artifacts, filled up to the requested stage.
    std::string listing;
    std::string tir;
    std::string dot;
    std::optional<FactBase> facts;
};

/// Runs one contract through the pipeline up to `stage` under the config's bounds.
/// Never throws for bad input; failures land in `status`.
ContractResult process(const std::string& name, const Bytes& code, Stage stage, const RunConfig& config);

/// Report text for one contract.
std::string format_report(const ContractResult& result, const RunConfig& config);

/// Exit code for a single contract.
int exit_code(const ContractResult& result);

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace evmlens::cli
