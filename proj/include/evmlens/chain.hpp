// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#pragma once

// Contract bytecode scraping over an Ethereum node's JSON-RPC API.

#include <evmlens/word.hpp>

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace evmlens::chain {

using json = nlohmann::json;

/// The node answered with a JSON-RPC error object.
class RpcError : public std::runtime_error
{
public:
    RpcError(std::string method, int code, const std::string& message);
    const std::string& method() const { return method_; }
    int code() const { return code_; }

private:
    std::string method_;
    int code_;
};

/// The node does not offer a method the scraper needs (usually tracing).
class CapabilityError : public RpcError
{
public:
    using RpcError::RpcError;
};

/// No usable answer after every retry.
class TransportError : public std::runtime_error
{
public:
    TransportError(const std::string& what, int attempts);
    int attempts() const { return attempts_; }

private:
    int attempts_;
};

class RpcTransport
{
public:
    virtual ~RpcTransport() = default;
    /// Returns the "result" member. Throws RpcError, CapabilityError or TransportError.
    virtual json call(const std::string& method, const json& params) = 0;
};

struct RetryPolicy
{
    int attempts = 3;
    std::chrono::milliseconds base_delay{250};
    std::chrono::milliseconds timeout{30000};
};

/// JSON-RPC 2.0 over HTTP(S) POST. Connection failures, timeouts and 5xx/429
/// responses are retried with exponential backoff.
class HttpTransport : public RpcTransport
{
public:
    explicit HttpTransport(std::string endpoint, RetryPolicy policy = {});
    ~HttpTransport() override;
    json call(const std::string& method, const json& params) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Replays recorded responses. File layout:
///   {"calls": [{"method": m, "params": [...], "result": r}
///            | {"method": m, "params": [...], "error": {"code": c, "message": s}}]}
class FixtureTransport : public RpcTransport
{
public:
    explicit FixtureTransport(const json& recording);
    static FixtureTransport from_file(const std::filesystem::path& path);

    json call(const std::string& method, const json& params) override;
    /// Number of calls served so far, per method.
    std::map<std::string, int> counts() const;

private:
    std::map<std::pair<std::string, std::string>, json> answers_;
    mutable std::mutex mu_;
    std::map<std::string, int> counts_;
};

/// Method names are configurable so other tracing APIs can be substituted.
struct RpcMethods
{
    std::string get_block = "eth_getBlockByNumber";
    std::string get_code = "eth_getCode";
    std::string get_receipt = "eth_getTransactionReceipt";
    std::string trace = "trace_transaction";
};

/// How a top-level transaction is recognised as a contract creation.
enum class CreationRule
{
    /// `to` is null; address from the transaction's `creates` field, else the receipt.
    to_null,
    /// The receipt carries a non-null `contractAddress`.
    receipt,
};

struct TraceEntry
{
    std::string type;
    std::optional<std::string> created;  ///< set for successful "create" entries
};

class ChainClient
{
public:
    explicit ChainClient(RpcTransport& transport, RpcMethods methods = {});

    /// Block with full transaction objects.
    json get_block(std::uint64_t number);
    /// Null when the node has no receipt for the hash.
    json get_receipt(const std::string& tx_hash);
    /// Empty for externally owned accounts.
    Bytes get_code(const std::string& address);
    std::vector<TraceEntry> trace_transaction(const std::string& tx_hash);

    const RpcMethods& methods() const { return methods_; }

private:
    RpcTransport& transport_;
    RpcMethods methods_;
};

struct ContractRecord
{
    std::string address;  ///< 0x + 40 lowercase hex digits
    Bytes code;
    std::string creating_tx;
    std::uint64_t block_number = 0;

    friend bool operator==(const ContractRecord&, const ContractRecord&) = default;
    friend auto operator<=>(const ContractRecord&, const ContractRecord&) = default;
};

/// Half-open block interval [start, end).
struct BlockRange
{
    std::uint64_t start = 0;
    std::uint64_t end = 0;
};

/// Splits a range into at most n contiguous non-empty chunks.
std::vector<BlockRange> partition(BlockRange range, std::size_t n);

class ContractSink
{
public:
    virtual ~ContractSink() = default;
    /// Must be safe to call from several scraping threads.
    virtual void save(const ContractRecord& record) = 0;
};

class MemorySink : public ContractSink
{
public:
    void save(const ContractRecord& record) override;
    std::set<ContractRecord> records() const;

private:
    mutable std::mutex mu_;
    std::set<ContractRecord> records_;
};

/// Writes `<address>.hex` per contract and one `address\ttx\tblock` line per
/// record to index.tsv. Lines already in an existing index are not repeated.
class DirectorySink : public ContractSink
{
public:
    explicit DirectorySink(std::filesystem::path dir);
    void save(const ContractRecord& record) override;
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::mutex mu_;
    std::set<std::string> indexed_;
};

struct ScrapeConfig
{
    CreationRule creation = CreationRule::to_null;
    /// Skip creations whose receipt reports failure (status 0x0). Without a
    /// receipt the creation is kept.
    bool skip_failed = true;
    /// Called once per logged failure.
    std::function<void(const std::string&)> log;
};

struct ScrapeFailure
{
    std::uint64_t block = 0;
    std::string tx;  ///< empty when the whole block could not be fetched
    std::string what;
};

struct ScrapeSummary
{
    std::uint64_t blocks = 0;
    std::uint64_t transactions = 0;
    std::uint64_t records = 0;
    std::uint64_t empty_code = 0;
    std::uint64_t failed_creations = 0;
    std::vector<ScrapeFailure> failures;

    ScrapeSummary& operator+=(const ScrapeSummary& other);
};

/// Walks every transaction of every block in the range: a direct creation is
/// saved with the code at its address, any other transaction has its trace
/// searched for internal creations. Per-block and per-transaction errors are
/// recorded in the summary and the walk continues.
ScrapeSummary scrape_range(ChainClient& client, BlockRange range, ContractSink& sink,
                           const ScrapeConfig& config = {});

/// Canonical lowercase "0x"-prefixed address, or nullopt for anything else.
std::optional<std::string> canonical_address(const json& value);

std::uint64_t parse_quantity(const json& value);
std::string quantity(std::uint64_t n);

}  // namespace evmlens::chain
