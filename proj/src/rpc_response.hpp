// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#pragma once

#include <evmlens/chain.hpp>

namespace evmlens::chain {

/// The "result" of a JSON-RPC response object, or the matching exception.
json unwrap_response(const std::string& method, const json& response);

}  // namespace evmlens::chain
