// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#include <evmlens/chain.hpp>
#include <evmlens/isa.hpp>

#include "rpc_response.hpp"

#include <boost/algorithm/hex.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace evmlens::chain {

RpcError::RpcError(std::string method, int code, const std::string& message)
    : std::runtime_error(method + ": " + message + " (code " + std::to_string(code) + ")"),
      method_(std::move(method)), code_(code)
{
}

TransportError::TransportError(const std::string& what, int attempts)
    : std::runtime_error(what + " after " + std::to_string(attempts) + " attempt" +
                         (attempts == 1 ? "" : "s")),
      attempts_(attempts)
{
}

json unwrap_response(const std::string& method, const json& response)
{
    if (response.contains("error") && !response["error"].is_null()) {
        const auto& err = response["error"];
        int code = err.value("code", 0);
        std::string message = err.value("message", std::string("unknown error"));
        if (code == -32601)
            throw CapabilityError(method, code,
                                  message + "; this node does not serve " + method +
                                      ", use an archive node with tracing enabled");
        throw RpcError(method, code, message);
    }
    if (!response.contains("result"))
        throw RpcError(method, -32603, "response has neither result nor error");
    return response["result"];
}

// Fixture replay

FixtureTransport::FixtureTransport(const json& recording)
{
    for (const auto& c : recording.at("calls")) {
        auto key = std::make_pair(c.at("method").get<std::string>(),
                                  c.value("params", json::array()).dump());
        json response = json::object();
        if (c.contains("error"))
            response["error"] = c["error"];
        else
            response["result"] = c.at("result");
        answers_[key] = std::move(response);
    }
}

FixtureTransport FixtureTransport::from_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open RPC fixture " + path.string());
    return FixtureTransport(json::parse(in));
}

json FixtureTransport::call(const std::string& method, const json& params)
{
    {
        std::lock_guard lock(mu_);
        ++counts_[method];
    }
    auto it = answers_.find({method, params.dump()});
    if (it == answers_.end())
        throw RpcError(method, -32000, "no recorded response for " + params.dump());
    return unwrap_response(method, it->second);
}

std::map<std::string, int> FixtureTransport::counts() const
{
    std::lock_guard lock(mu_);
    return counts_;
}

// Value helpers

std::optional<std::string> canonical_address(const json& value)
{
    if (!value.is_string())
        return std::nullopt;
    auto s = value.get<std::string>();
    if (s.size() != 42 || s[0] != '0' || (s[1] != 'x' && s[1] != 'X'))
        return std::nullopt;
    s[1] = 'x';
    for (std::size_t i = 2; i < s.size(); ++i) {
        if (!std::isxdigit(static_cast<unsigned char>(s[i])))
            return std::nullopt;
        s[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[i])));
    }
    return s;
}

std::uint64_t parse_quantity(const json& value)
{
    if (value.is_number_integer() && value.get<std::int64_t>() >= 0)
        return value.get<std::uint64_t>();
    if (!value.is_string())
        throw std::invalid_argument("quantity is not a string: " + value.dump());
    auto s = value.get<std::string>();
    if (!s.starts_with("0x") || s.size() < 3)
        throw std::invalid_argument("malformed quantity " + s);
    std::size_t used = 0;
    auto n = std::stoull(s.substr(2), &used, 16);
    if (used != s.size() - 2)
        throw std::invalid_argument("malformed quantity " + s);
    return n;
}

std::string quantity(std::uint64_t n)
{
    std::ostringstream out;
    out << "0x" << std::hex << n;
    return out.str();
}

// Client

ChainClient::ChainClient(RpcTransport& transport, RpcMethods methods)
    : transport_(transport), methods_(std::move(methods))
{
}

json ChainClient::get_block(std::uint64_t number)
{
    return transport_.call(methods_.get_block, json::array({quantity(number), true}));
}

json ChainClient::get_receipt(const std::string& tx_hash)
{
    return transport_.call(methods_.get_receipt, json::array({tx_hash}));
}

Bytes ChainClient::get_code(const std::string& address)
{
    auto result = transport_.call(methods_.get_code, json::array({address, "latest"}));
    if (!result.is_string())
        throw RpcError(methods_.get_code, -32603, "code is not a hex string");
    return parse_hex(result.get<std::string>());
}

std::vector<TraceEntry> ChainClient::trace_transaction(const std::string& tx_hash)
{
    auto result = transport_.call(methods_.trace, json::array({tx_hash}));
    if (result.is_null())
        throw RpcError(methods_.trace, -32000, "no trace for " + tx_hash);
    std::vector<TraceEntry> out;
    for (const auto& t : result) {
        TraceEntry e;
        e.type = t.value("type", std::string());
        bool failed = t.contains("error") && !t["error"].is_null();
        if (e.type == "create" && !failed && t.contains("result") && t["result"].is_object())
            e.created = canonical_address(t["result"].value("address", json()));
        out.push_back(std::move(e));
    }
    return out;
}

// Ranges and sinks

std::vector<BlockRange> partition(BlockRange range, std::size_t n)
{
    std::vector<BlockRange> out;
    if (range.end <= range.start)
        return out;
    std::uint64_t size = range.end - range.start;
    std::uint64_t chunks = std::clamp<std::uint64_t>(n, 1, size);
    std::uint64_t at = range.start;
    for (std::uint64_t i = 0; i < chunks; ++i) {
        std::uint64_t len = size / chunks + (i < size % chunks ? 1 : 0);
        out.push_back({at, at + len});
        at += len;
    }
    return out;
}

void MemorySink::save(const ContractRecord& record)
{
    std::lock_guard lock(mu_);
    records_.insert(record);
}

std::set<ContractRecord> MemorySink::records() const
{
    std::lock_guard lock(mu_);
    return records_;
}

DirectorySink::DirectorySink(std::filesystem::path dir) : dir_(std::move(dir))
{
    std::filesystem::create_directories(dir_);
    std::ifstream in(dir_ / "index.tsv");
    for (std::string line; std::getline(in, line);)
        if (!line.empty())
            indexed_.insert(line);
}

void DirectorySink::save(const ContractRecord& record)
{
    std::string hex;
    boost::algorithm::hex_lower(record.code.begin(), record.code.end(), std::back_inserter(hex));
    std::string line = record.address + "\t" + record.creating_tx + "\t" +
                       std::to_string(record.block_number);

    std::lock_guard lock(mu_);
    auto target = dir_ / (record.address + ".hex");
    auto tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << hex << '\n';
        if (!out)
            throw std::filesystem::filesystem_error("cannot write contract file", tmp,
                                                    std::make_error_code(std::errc::io_error));
    }
    std::filesystem::rename(tmp, target);
    if (indexed_.insert(line).second) {
        std::ofstream index(dir_ / "index.tsv", std::ios::app);
        index << line << '\n';
    }
}

ScrapeSummary& ScrapeSummary::operator+=(const ScrapeSummary& other)
{
    blocks += other.blocks;
    transactions += other.transactions;
    records += other.records;
    empty_code += other.empty_code;
    failed_creations += other.failed_creations;
    failures.insert(failures.end(), other.failures.begin(), other.failures.end());
    return *this;
}

// Scraping

namespace {

bool receipt_failed(const json& receipt)
{
    return receipt.is_object() && receipt.contains("status") && receipt["status"].is_string() &&
           parse_quantity(receipt["status"]) == 0;
}

}  // namespace

ScrapeSummary scrape_range(ChainClient& client, BlockRange range, ContractSink& sink,
                           const ScrapeConfig& config)
{
    ScrapeSummary summary;
    auto fail = [&](std::uint64_t block, std::string tx, std::string what) {
        if (config.log)
            config.log("block " + std::to_string(block) + (tx.empty() ? "" : " tx " + tx) +
                       ": " + what);
        summary.failures.push_back({block, std::move(tx), std::move(what)});
    };

    for (std::uint64_t b = range.start; b < range.end; ++b) {
        json block;
        try {
            block = client.get_block(b);
        } catch (const std::exception& e) {
            fail(b, "", e.what());
            continue;
        }
        if (!block.is_object()) {
            fail(b, "", "block not found");
            continue;
        }
        ++summary.blocks;

        for (const auto& tx : block.value("transactions", json::array())) {
            ++summary.transactions;
            std::string hash = tx.is_object() ? tx.value("hash", std::string()) : std::string();
            try {
                if (hash.empty())
                    throw std::runtime_error("block lists transactions without full objects");

                std::optional<json> receipt;
                auto get_receipt = [&]() -> const json& {
                    if (!receipt)
                        receipt = client.get_receipt(hash);
                    return *receipt;
                };
                auto save = [&](const std::string& address) {
                    Bytes code = client.get_code(address);
                    if (code.empty()) {
                        ++summary.empty_code;
                        return;
                    }
                    sink.save({address, std::move(code), hash, b});
                    ++summary.records;
                };

                bool direct = false;
                std::optional<std::string> created;
                if (config.creation == CreationRule::to_null) {
                    direct = !tx.contains("to") || tx["to"].is_null();
                    if (direct) {
                        created = canonical_address(tx.value("creates", json()));
                        if (!created)
                            created = canonical_address(get_receipt().value("contractAddress", json()));
                    }
                } else {
                    const json& r = get_receipt();
                    created = r.is_object() ? canonical_address(r.value("contractAddress", json()))
                                            : std::nullopt;
                    direct = created.has_value();
                }

                if (direct) {
                    if (!created)
                        throw std::runtime_error("creation without a contract address");
                    if (config.skip_failed) {
                        bool failed = false;
                        try {
                            failed = receipt_failed(get_receipt());
                        } catch (const RpcError&) {
                            // no receipt data: keep the creation
                        }
                        if (failed) {
                            ++summary.failed_creations;
                            continue;
                        }
                    }
                    save(*created);
                } else {
                    for (const auto& entry : client.trace_transaction(hash)) {
                        if (entry.type != "create")
                            continue;
                        if (entry.created)
                            save(*entry.created);
                        else
                            ++summary.failed_creations;
                    }
                }
            } catch (const CapabilityError&) {
                throw;
            } catch (const std::exception& e) {
                fail(b, hash, e.what());
            }
        }
    }
    return summary;
}

}  // namespace evmlens::chain
