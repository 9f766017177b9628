// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#include <evmlens/chain.hpp>

#include "rpc_response.hpp"

#include <httplib.h>

#include <atomic>
#include <thread>

namespace evmlens::chain {

struct HttpTransport::Impl
{
    std::string origin;  // scheme://host[:port]
    std::string path;
    RetryPolicy policy;
    std::atomic<std::uint64_t> next_id{1};
};

HttpTransport::HttpTransport(std::string endpoint, RetryPolicy policy) : impl_(std::make_unique<Impl>())
{
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos)
        throw std::invalid_argument("endpoint needs a scheme: " + endpoint);
    auto slash = endpoint.find('/', scheme_end + 3);
    impl_->origin = endpoint.substr(0, slash);
    impl_->path = slash == std::string::npos ? "/" : endpoint.substr(slash);
    impl_->policy = policy;
    if (impl_->policy.attempts < 1)
        impl_->policy.attempts = 1;
}

HttpTransport::~HttpTransport() = default;

json HttpTransport::call(const std::string& method, const json& params)
{
    const auto& pol = impl_->policy;
    json request = {{"jsonrpc", "2.0"},
                    {"id", impl_->next_id++},
                    {"method", method},
                    {"params", params}};
    std::string body = request.dump();

    httplib::Client client(impl_->origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(pol.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(pol.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());

    std::string last_error;
    for (int attempt = 1; attempt <= pol.attempts; ++attempt) {
        if (attempt > 1)
            std::this_thread::sleep_for(pol.base_delay * (1 << (attempt - 2)));

        auto res = client.Post(impl_->path, body, "application/json");
        if (!res) {
            last_error = method + ": " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = method + ": HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw TransportError(method + ": HTTP " + std::to_string(res->status), attempt);

        json response = json::parse(res->body, nullptr, false);
        if (response.is_discarded() || !response.is_object())
            throw TransportError(method + ": response is not a JSON-RPC object", attempt);
        return unwrap_response(method, response);
    }
    throw TransportError(last_error, pol.attempts);
}

}  // namespace evmlens::chain
