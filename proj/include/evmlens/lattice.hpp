// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#pragma once

#include <evmlens/word.hpp>

#include <cstddef>
#include <set>

namespace evmlens {

/// Constant-propagation value: Bottom, a bounded set of words, or Top.
///
/// Ordered Bottom < Const(S) < Const(S') < Top for S a subset of S'. Joining
/// past `cap` values widens to Top.
class LatticeValue
{
public:
    enum class Kind : unsigned char
    {
        bottom,
        constant,
        top
    };

    LatticeValue() = default;

    static LatticeValue bottom() { return {}; }
    static LatticeValue top()
    {
        LatticeValue v;
        v.kind_ = Kind::top;
        return v;
    }
    static LatticeValue of(const Word& w)
    {
        LatticeValue v;
        v.kind_ = Kind::constant;
        v.values_.insert(w);
        return v;
    }
    static LatticeValue of(std::set<Word> values, std::size_t cap);

    Kind kind() const noexcept { return kind_; }
    bool is_bottom() const noexcept { return kind_ == Kind::bottom; }
    bool is_top() const noexcept { return kind_ == Kind::top; }
    bool is_const() const noexcept { return kind_ == Kind::constant; }
    bool is_singleton() const noexcept { return is_const() && values_.size() == 1; }

    /// Empty unless is_const().
    const std::set<Word>& values() const noexcept { return values_; }

    /// Least upper bound; returns true if *this changed.
    bool join(const LatticeValue& other, std::size_t cap);

    /// Partial order test: *this below or equal to other.
    bool leq(const LatticeValue& other) const;

    friend bool operator==(const LatticeValue&, const LatticeValue&) = default;

private:
    Kind kind_ = Kind::bottom;
    std::set<Word> values_;
};

}  // namespace evmlens
