// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#include <evmlens/chain.hpp>
#include <evmlens/cfg.hpp>
#include <evmlens/cli.hpp>
#include <evmlens/errors.hpp>
#include <evmlens/extract.hpp>
#include <evmlens/isa.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace evmlens::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string_view to_string(Status s)
{
    switch (s) {
    case Status::success:
        return "success";
    case Status::timeout:
        return "timeout";
    case Status::error:
        return "error";
    }
    return "?";
}

ojson RunConfig::snapshot() const
{
    return ojson{{"timeout_seconds", timeout_seconds},
                 {"max_iterations", max_iterations},
                 {"const_set_cap", const_set_cap},
                 {"clone_budget", clone_budget}};
}

namespace {

std::chrono::milliseconds timeout_of(const RunConfig& config)
{
    return std::chrono::milliseconds(static_cast<std::int64_t>(config.timeout_seconds * 1000));
}

std::string seconds_text(double s)
{
    std::ostringstream out;
    out << s;
    return out.str();
}

}  // namespace

ContractResult process(const std::string& name, const Bytes& code, Stage stage, const RunConfig& config)
{
    ContractResult r;
    r.name = name;
    const auto start = std::chrono::steady_clock::now();
    const Deadline deadline = start + timeout_of(config);
    auto expired = [&] { return std::chrono::steady_clock::now() > *deadline; };
    auto timed_out = [&](const std::string& where) {
        r.status = Status::timeout;
        r.message = where + " exceeded the " + seconds_text(config.timeout_seconds) + " s timeout";
    };

    try {
        r.listing = format_listing(disassemble(code));
        if (stage != Stage::disasm) {
            DecompilerConfig dc;
            dc.timeout = timeout_of(config);
            dc.deadline = deadline;
            dc.max_iterations = config.max_iterations;
            dc.const_set_cap = config.const_set_cap;
            dc.clone_budget = config.clone_budget;
            auto d = decompile(code, dc);
            if (d.timed_out() || expired()) {
                timed_out("decompilation");
            } else {
                r.tir = format_tir(d.cfg);
                r.dot = format_dot(d.cfg);
                if (stage != Stage::decompile) {
                    r.facts = extract_facts(d.cfg);
                    if (expired())
                        timed_out("fact extraction");
                    else if (stage == Stage::analyze)
                        r.findings = run_analyses(*r.facts, {std::begin(all_analyses), std::end(all_analyses)},
                                                  deadline);
                }
            }
        }
    } catch (const Timeout&) {
        timed_out("analysis");
    } catch (const MalformedInput& e) {
        r.status = Status::error;
        r.message = std::string("malformed input: ") + e.what();
    } catch (const std::exception& e) {
        r.status = Status::error;
        r.message = e.what();
    }
    if (r.status != Status::success)
        r.findings.clear();
    r.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    return r;
}

std::string format_report(const ContractResult& result, const RunConfig& config)
{
    std::ostringstream out;
    switch (config.format) {
    case ReportFormat::json: {
        ojson findings = ojson::array();
        for (const auto& f : result.findings) {
            ojson witness = ojson::array();
            for (const auto& w : f.witness)
                witness.push_back(w.to_string());
            findings.push_back({{"analysis", to_string(f.analysis)},
                                {"pc", f.stmt},
                                {"opcode", f.opcode},
                                {"witness", witness}});
        }
        ojson doc = {{"tool", tool_name},
                     {"version", tool_version},
                     {"input", result.name},
                     {"config", config.snapshot()},
                     {"status", to_string(result.status)}};
        if (!result.message.empty())
            doc["message"] = result.message;
        doc["findings"] = findings;
        out << doc.dump(2) << '\n';
        break;
    }
    case ReportFormat::tsv:
        out << "analysis\tpc\topcode\twitness\n";
        for (const auto& f : result.findings) {
            out << to_string(f.analysis) << '\t' << f.stmt << '\t' << f.opcode << '\t';
            for (std::size_t i = 0; i < f.witness.size(); ++i)
                out << (i ? "; " : "") << f.witness[i].to_string();
            out << '\n';
        }
        break;
    case ReportFormat::text:
        if (result.status != Status::success)
            out << result.name << ": " << to_string(result.status) << ": " << result.message << '\n';
        else if (result.findings.empty())
            out << result.name << ": no findings\n";
        for (const auto& f : result.findings) {
            out << result.name << ": " << to_string(f.analysis) << " at " << f.stmt << " (" << f.opcode
                << ")\n";
            for (const auto& w : f.witness)
                out << "    " << w.to_string() << '\n';
        }
        break;
    }
    return out.str();
}

int exit_code(const ContractResult& result)
{
    switch (result.status) {
    case Status::timeout:
        return exit_timeout;
    case Status::error:
        return exit_error;
    case Status::success:
        break;
    }
    return result.findings.empty() ? exit_clean : exit_findings;
}

namespace {

struct UsageError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

const char* report_extension(ReportFormat f)
{
    switch (f) {
    case ReportFormat::json:
        return "json";
    case ReportFormat::tsv:
        return "tsv";
    case ReportFormat::text:
        return "txt";
    }
    return "txt";
}

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out)
        throw fs::filesystem_error("cannot write", path, std::make_error_code(std::errc::io_error));
}

void write_artifacts(const ContractResult& r, Stage stage, const RunConfig& config, const fs::path& dir)
{
    fs::create_directories(dir);
    write_file(dir / "listing.txt", r.listing);
    if (!r.tir.empty()) {
        write_file(dir / "tir.txt", r.tir);
        write_file(dir / "cfg.dot", r.dot);
    }
    if (r.facts)
        write_tsv(*r.facts, dir / "facts");
    if (stage == Stage::analyze)
        write_file(dir / (std::string("report.") + report_extension(config.format)), format_report(r, config));
}

struct Input
{
    std::string name;
    fs::path path;
};

std::vector<Input> expand_inputs(const std::vector<std::string>& args, bool& batch)
{
    std::vector<fs::path> files;
    batch = args.size() > 1;
    for (const auto& a : args) {
        fs::path p(a);
        if (fs::is_directory(p)) {
            batch = true;
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p))
                if (e.is_regular_file() && e.path().extension() == ".hex")
                    found.push_back(e.path());
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else if (fs::is_regular_file(p)) {
            files.push_back(p);
        } else {
            throw UsageError("no such input: " + a);
        }
    }
    std::vector<Input> out;
    std::map<std::string, int> seen;
    for (const auto& f : files) {
        std::string name = f.stem().string();
        if (int n = ++seen[name]; n > 1)
            name += "-" + std::to_string(n);
        out.push_back({name, f});
    }
    return out;
}

ContractResult process_file(const Input& in, Stage stage, const RunConfig& config)
{
    std::ifstream file(in.path, std::ios::binary);
    std::stringstream text;
    text << file.rdbuf();
    if (!file) {
        ContractResult r;
        r.name = in.name;
        r.status = Status::error;
        r.message = "cannot read " + in.path.string();
        return r;
    }
    Bytes code;
    try {
        code = parse_hex(text.str());
    } catch (const MalformedInput& e) {
        ContractResult r;
        r.name = in.name;
        r.status = Status::error;
        r.message = std::string("malformed input: ") + e.what();
        return r;
    }
    return process(in.name, code, stage, config);
}

int single(const Input& in, Stage stage, const RunConfig& config, bool dot, std::ostream& out,
           std::ostream& err)
{
    auto r = process_file(in, stage, config);
    if (config.output_dir)
        write_artifacts(r, stage, config, *config.output_dir);
    if (r.status != Status::success)
        err << tool_name << ": " << in.name << ": " << to_string(r.status) << ": " << r.message << '\n';
    switch (stage) {
    case Stage::disasm:
        out << r.listing;
        break;
    case Stage::decompile:
        out << (dot ? r.dot : r.tir);
        break;
    case Stage::extract:
        if (r.facts)
            for (const auto& [rel, schema] : r.facts->schemas())
                out << rel << '\t' << r.facts->size(rel) << '\n';
        break;
    case Stage::analyze:
        out << format_report(r, config);
        break;
    }
    return exit_code(r);
}

int batch(const std::vector<Input>& inputs, Stage stage, const RunConfig& config, std::ostream& out,
          std::ostream& err)
{
    std::vector<ContractResult> results(inputs.size());
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    auto worker = [&] {
        for (std::size_t i; (i = next++) < inputs.size();) {
            results[i] = process_file(inputs[i], stage, config);
            if (config.output_dir) {
                try {
                    write_artifacts(results[i], stage, config, *config.output_dir / inputs[i].name);
                } catch (const std::exception& e) {
                    results[i].status = Status::error;
                    results[i].message = e.what();
                }
            }
            if (results[i].status != Status::success) {
                std::lock_guard lock(err_mu);
                err << tool_name << ": " << inputs[i].name << ": " << to_string(results[i].status) << ": "
                    << results[i].message << '\n';
            }
        }
    };
    std::vector<std::thread> pool;
    unsigned n = std::max(1u, std::min<unsigned>(config.jobs, static_cast<unsigned>(inputs.size())));
    for (unsigned i = 0; i < n; ++i)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();

    std::map<Status, std::size_t> by_status;
    std::map<Analysis, std::size_t> flagged;
    std::size_t width = 8;
    for (const auto& r : results)
        width = std::max(width, r.name.size());
    std::ostringstream table;
    table << std::left << std::setw(static_cast<int>(width)) << "contract" << "  " << std::setw(8) << "status"
          << "  " << std::setw(8) << "findings" << "  ms\n";
    for (const auto& r : results) {
        ++by_status[r.status];
        std::set<Analysis> kinds;
        for (const auto& f : r.findings)
            kinds.insert(f.analysis);
        for (auto a : kinds)
            ++flagged[a];
        table << std::setw(static_cast<int>(width)) << r.name << "  " << std::setw(8) << to_string(r.status)
              << "  " << std::setw(8) << r.findings.size() << "  " << r.elapsed.count() << '\n';
    }
    table << '\n';
    for (auto s : {Status::success, Status::timeout, Status::error})
        table << std::setw(9) << to_string(s) << by_status[s] << '\n';
    table << std::setw(9) << "total" << results.size() << '\n';
    if (stage == Stage::analyze) {
        table << '\n';
        for (auto a : all_analyses)
            table << std::setw(18) << to_string(a) << flagged[a] << " contracts\n";
    }
    out << table.str();
    if (config.output_dir) {
        fs::create_directories(*config.output_dir);
        write_file(*config.output_dir / "summary.txt", table.str());
    }

    if (by_status[Status::error])
        return exit_error;
    if (by_status[Status::timeout])
        return exit_timeout;
    bool any = std::any_of(results.begin(), results.end(), [](const auto& r) { return !r.findings.empty(); });
    return any ? exit_findings : exit_clean;
}

struct ScrapeOptions
{
    std::string endpoint;
    std::string fixture;
    std::uint64_t from = 0;
    std::uint64_t to = 0;
    std::string creation = "to-null";
    bool keep_failed = false;
    chain::RpcMethods methods;
};

int scrape(const ScrapeOptions& o, const RunConfig& config, std::ostream& out, std::ostream& err)
{
    if (o.endpoint.empty() == o.fixture.empty())
        throw UsageError("scrape needs exactly one of --endpoint or --rpc-fixture");
    if (o.from > o.to)
        throw UsageError("--from-block is after --to-block");
    if (!config.output_dir)
        throw UsageError("scrape needs --out");

    chain::ScrapeConfig sc;
    sc.creation = o.creation == "receipt" ? chain::CreationRule::receipt : chain::CreationRule::to_null;
    sc.skip_failed = !o.keep_failed;
    std::mutex log_mu;
    sc.log = [&](const std::string& line) {
        std::lock_guard lock(log_mu);
        err << tool_name << ": " << line << '\n';
    };

    std::unique_ptr<chain::FixtureTransport> fixture;
    if (!o.fixture.empty()) {
        std::ifstream in(o.fixture);
        if (!in)
            throw UsageError("cannot open " + o.fixture);
        fixture = std::make_unique<chain::FixtureTransport>(nlohmann::json::parse(in));
    }

    chain::DirectorySink sink(*config.output_dir);
    auto parts = chain::partition({o.from, o.to}, config.jobs);
    std::vector<chain::ScrapeSummary> sums(parts.size());
    std::vector<std::string> fatal(parts.size());
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        pool.emplace_back([&, i] {
            try {
                std::optional<chain::HttpTransport> http;
                chain::RpcTransport* transport = nullptr;
                if (fixture) {
                    transport = fixture.get();
                } else {
                    http.emplace(o.endpoint);
                    transport = &*http;
                }
                chain::ChainClient client(*transport, o.methods);
                sums[i] = chain::scrape_range(client, parts[i], sink, sc);
            } catch (const std::exception& e) {
                fatal[i] = e.what();
            }
        });
    }
    for (auto& t : pool)
        t.join();

    chain::ScrapeSummary total;
    for (const auto& s : sums)
        total += s;
    out << "blocks        " << total.blocks << '\n'
        << "transactions  " << total.transactions << '\n'
        << "contracts     " << total.records << '\n'
        << "empty code    " << total.empty_code << '\n'
        << "failed        " << total.failed_creations << '\n'
        << "errors        " << total.failures.size() << '\n';
    for (const auto& f : total.failures)
        out << "  block " << f.block << (f.tx.empty() ? "" : " tx " + f.tx) << ": " << f.what << '\n';
    bool aborted = false;
    for (const auto& f : fatal) {
        if (f.empty())
            continue;
        err << tool_name << ": scrape aborted: " << f << '\n';
        aborted = true;
    }
    return aborted || !total.failures.empty() ? exit_error : exit_clean;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Static security analysis for EVM bytecode", tool_name};
    app.set_version_flag("--version", tool_version);
    app.require_subcommand(1);

    RunConfig config;
    config.jobs = std::max(1u, std::thread::hardware_concurrency());
    std::string out_dir;
    std::string format = "json";
    std::vector<std::string> inputs;
    bool dot = false;
    ScrapeOptions so;

    auto add_bounds = [&](CLI::App* sub) {
        sub->add_option("--timeout", config.timeout_seconds, "Per-contract wall-clock limit in seconds")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--max-iterations", config.max_iterations, "Fixed-point round bound")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--const-cap", config.const_set_cap, "Constant-set size before widening")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--clone-budget", config.clone_budget, "Block growth factor allowed by node splitting")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--jobs,-j", config.jobs, "Worker threads for batch input")->check(CLI::PositiveNumber);
        sub->add_option("--out,-o", out_dir, "Artifact directory");
        sub->add_option("inputs", inputs, "Hex bytecode files or directories of .hex files")->required();
    };

    auto* disasm = app.add_subcommand("disasm", "Print the instruction listing");
    add_bounds(disasm);
    auto* decomp = app.add_subcommand("decompile", "Print three-address code for the recovered CFG");
    add_bounds(decomp);
    decomp->add_flag("--dot", dot, "Print the CFG as Graphviz instead");
    auto* extract = app.add_subcommand("extract", "Write relation files for the recovered CFG");
    add_bounds(extract);
    auto* analyze = app.add_subcommand("analyze", "Run the vulnerability analyses");
    add_bounds(analyze);
    analyze->add_option("--format", format, "Report format")
        ->check(CLI::IsMember({"json", "tsv", "text"}))
        ->capture_default_str();

    auto* scr = app.add_subcommand("scrape", "Download contract bytecode created in a block range");
    scr->add_option("--endpoint", so.endpoint, "JSON-RPC URL of a tracing-enabled node");
    scr->add_option("--rpc-fixture", so.fixture, "Replay recorded JSON-RPC responses from a file");
    scr->add_option("--from-block", so.from, "First block (inclusive)")->required();
    scr->add_option("--to-block", so.to, "End block (exclusive)")->required();
    scr->add_option("--out,-o", out_dir, "Directory for <address>.hex files and index.tsv")->required();
    scr->add_option("--jobs,-j", config.jobs, "Parallel block-range chunks")->check(CLI::PositiveNumber);
    scr->add_option("--creation-rule", so.creation, "How direct creations are detected")
        ->check(CLI::IsMember({"to-null", "receipt"}))
        ->capture_default_str();
    scr->add_flag("--keep-failed", so.keep_failed, "Keep creations whose receipt reports failure");
    scr->add_option("--block-method", so.methods.get_block, "RPC method names, for nodes with other APIs")->capture_default_str();
    scr->add_option("--code-method", so.methods.get_code)->capture_default_str();
    scr->add_option("--receipt-method", so.methods.get_receipt)->capture_default_str();
    scr->add_option("--trace-method", so.methods.trace)->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? exit_clean : exit_usage;
    }

    if (!out_dir.empty())
        config.output_dir = fs::path(out_dir);
    config.format = format == "tsv" ? ReportFormat::tsv : format == "text" ? ReportFormat::text : ReportFormat::json;

    try {
        if (*scr)
            return scrape(so, config, out, err);

        Stage stage = *disasm ? Stage::disasm : *decomp ? Stage::decompile : *extract ? Stage::extract : Stage::analyze;
        bool is_batch = false;
        auto files = expand_inputs(inputs, is_batch);
        if (stage == Stage::extract && !config.output_dir)
            throw UsageError("extract needs --out");
        if (!is_batch)
            return single(files.at(0), stage, config, dot, out, err);
        if (files.empty())
            throw UsageError("no .hex files found");
        return batch(files, stage, config, out, err);
    } catch (const UsageError& e) {
        err << tool_name << ": " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        err << tool_name << ": " << e.what() << '\n';
        return exit_error;
    }
}

}  // namespace evmlens::cli
