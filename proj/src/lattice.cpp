// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#include <evmlens/lattice.hpp>

#include <algorithm>

namespace evmlens {

LatticeValue LatticeValue::of(std::set<Word> values, std::size_t cap)
{
    if (values.empty())
        return bottom();
    if (values.size() > cap)
        return top();
    LatticeValue v;
    v.kind_ = Kind::constant;
    v.values_ = std::move(values);
    return v;
}

bool LatticeValue::join(const LatticeValue& other, std::size_t cap)
{
    if (is_top() || other.is_bottom())
        return false;
    if (other.is_top() || is_bottom()) {
        if (*this == other)
            return false;
        *this = other;
        if (values_.size() > cap)
            *this = top();
        return true;
    }
    const auto before = values_.size();
    values_.insert(other.values_.begin(), other.values_.end());
    if (values_.size() > cap) {
        *this = top();
        return true;
    }
    return values_.size() != before;
}

bool LatticeValue::leq(const LatticeValue& other) const
{
    if (is_bottom() || other.is_top())
        return true;
    if (is_top() || other.is_bottom())
        return false;
    return std::includes(other.values_.begin(), other.values_.end(), values_.begin(),
                         values_.end());
}

}  // namespace evmlens
