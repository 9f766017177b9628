// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evmlens {

enum class ColumnType : unsigned char
{
    statement,
    variable,
    opcode,
    value,
    number,
};

std::string_view to_string(ColumnType type);

using Tuple = std::vector<std::string>;

struct RelationSchema
{
    std::vector<ColumnType> columns;

    std::size_t arity() const noexcept { return columns.size(); }
    friend bool operator==(const RelationSchema&, const RelationSchema&) = default;
};

/// A relation or column did not match its declaration.
class SchemaError : public std::runtime_error
{
public:
    SchemaError(const std::string& relation, const std::string& what)
      : std::runtime_error("relation '" + relation + "': " + what), relation_(relation)
    {}

    const std::string& relation() const noexcept { return relation_; }

private:
    std::string relation_;
};

/// Named relations over symbol tuples, each with a declared schema.
class FactBase
{
public:
    /// Re-declaring with an identical schema is a no-op; a different one throws.
    void declare(const std::string& name, RelationSchema schema);

    bool declared(std::string_view name) const;
    const RelationSchema& schema(std::string_view name) const;
    const std::map<std::string, RelationSchema, std::less<>>& schemas() const noexcept
    {
        return schemas_;
    }

    /// Throws SchemaError for undeclared relations or arity mismatches.
    bool insert(std::string_view name, Tuple tuple);

    const std::set<Tuple>& relation(std::string_view name) const;
    bool contains(std::string_view name, const Tuple& tuple) const;
    std::size_t size(std::string_view name) const { return relation(name).size(); }

    /// Adds every relation of `other`, declaring as needed.
    void merge(const FactBase& other);

    /// Checks every tuple against its column domains; throws SchemaError naming the column.
    void validate() const;

    friend bool operator==(const FactBase&, const FactBase&) = default;

private:
    std::map<std::string, RelationSchema, std::less<>> schemas_;
    std::map<std::string, std::set<Tuple>, std::less<>> relations_;
};

/// Writes `<relation>.facts` per relation: tab-separated columns, rows sorted.
void write_tsv(const FactBase& facts, const std::filesystem::path& dir);

/// Reads `<name>.facts` for each declared relation of `schemas` from `dir`.
/// A missing file yields an empty relation.
FactBase read_tsv(const std::filesystem::path& dir,
                  const std::map<std::string, RelationSchema, std::less<>>& schemas);

}  // namespace evmlens
