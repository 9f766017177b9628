// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#include <evmlens/facts.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <system_error>

namespace evmlens {

std::string_view to_string(ColumnType type)
{
    switch (type) {
    case ColumnType::statement:
        return "Statement";
    case ColumnType::variable:
        return "Variable";
    case ColumnType::opcode:
        return "Opcode";
    case ColumnType::value:
        return "Value";
    case ColumnType::number:
        return "number";
    }
    return "?";
}

namespace {

bool canonical_hex(std::string_view s)
{
    if (!s.starts_with("0x") || s.size() < 3)
        return false;
    auto digits = s.substr(2);
    if (digits.size() > 1 && digits.front() == '0')
        return false;
    return std::all_of(digits.begin(), digits.end(),
                       [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

bool column_ok(ColumnType type, std::string_view s)
{
    switch (type) {
    case ColumnType::statement:
        return canonical_hex(s) || s == "0xEXIT";
    case ColumnType::value:
        return canonical_hex(s);
    case ColumnType::number:
        return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
            return std::isdigit(static_cast<unsigned char>(c)) != 0;
        });
    case ColumnType::opcode:
        return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
            return std::isupper(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '_';
        });
    case ColumnType::variable:
        return !s.empty() && s.find_first_of("\t\n") == std::string_view::npos;
    }
    return false;
}

}  // namespace

void FactBase::declare(const std::string& name, RelationSchema schema)
{
    auto it = schemas_.find(name);
    if (it != schemas_.end()) {
        if (!(it->second == schema))
            throw SchemaError(name, "redeclared with a different schema");
        return;
    }
    schemas_.emplace(name, std::move(schema));
    relations_.try_emplace(name);
}

bool FactBase::declared(std::string_view name) const
{
    return schemas_.find(name) != schemas_.end();
}

const RelationSchema& FactBase::schema(std::string_view name) const
{
    auto it = schemas_.find(name);
    if (it == schemas_.end())
        throw SchemaError(std::string(name), "not declared");
    return it->second;
}

bool FactBase::insert(std::string_view name, Tuple tuple)
{
    const auto& s = schema(name);
    if (tuple.size() != s.arity())
        throw SchemaError(std::string(name), "expected arity " + std::to_string(s.arity()) +
                                                 ", got " + std::to_string(tuple.size()));
    return relations_.find(name)->second.insert(std::move(tuple)).second;
}

const std::set<Tuple>& FactBase::relation(std::string_view name) const
{
    auto it = relations_.find(name);
    if (it == relations_.end())
        throw SchemaError(std::string(name), "not declared");
    return it->second;
}

bool FactBase::contains(std::string_view name, const Tuple& tuple) const
{
    return relation(name).contains(tuple);
}

void FactBase::merge(const FactBase& other)
{
    for (const auto& [name, s] : other.schemas_) {
        declare(name, s);
        auto& dst = relations_.find(name)->second;
        const auto& src = other.relations_.find(name)->second;
        dst.insert(src.begin(), src.end());
    }
}

void FactBase::validate() const
{
    for (const auto& [name, s] : schemas_) {
        for (const auto& t : relations_.find(name)->second) {
            for (std::size_t i = 0; i < t.size(); ++i) {
                if (!column_ok(s.columns[i], t[i]))
                    throw SchemaError(name, "column " + std::to_string(i) + " (" +
                                                std::string(to_string(s.columns[i])) +
                                                ") rejects '" + t[i] + "'");
            }
        }
    }
}

void write_tsv(const FactBase& facts, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw std::filesystem::filesystem_error("cannot create fact directory", dir, ec);
    for (const auto& [name, schema] : facts.schemas()) {
        const auto path = dir / (name + ".facts");
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::filesystem::filesystem_error(
                "cannot write", path, std::make_error_code(std::errc::io_error));
        for (const auto& tuple : facts.relation(name)) {
            for (std::size_t i = 0; i < tuple.size(); ++i) {
                if (i != 0)
                    out << '\t';
                out << tuple[i];
            }
            out << '\n';
        }
        if (!out)
            throw std::filesystem::filesystem_error(
                "write failed", path, std::make_error_code(std::errc::io_error));
    }
}

FactBase read_tsv(const std::filesystem::path& dir,
                  const std::map<std::string, RelationSchema, std::less<>>& schemas)
{
    FactBase facts;
    for (const auto& [name, schema] : schemas) {
        facts.declare(name, schema);
        const auto path = dir / (name + ".facts");
        std::ifstream in(path, std::ios::binary);
        if (!in)
            continue;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty())
                continue;
            Tuple t;
            std::size_t start = 0;
            while (true) {
                auto tab = line.find('\t', start);
                t.push_back(line.substr(start, tab == std::string::npos ? std::string::npos
                                                                        : tab - start));
                if (tab == std::string::npos)
                    break;
                start = tab + 1;
            }
            facts.insert(name, std::move(t));
        }
    }
    return facts;
}

}  // namespace evmlens
