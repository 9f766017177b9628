// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#include <evmlens/datalog.hpp>

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <unordered_map>
#include <unordered_set>

namespace evmlens::datalog {

Term::Term(const char* s) : text(s)
{
    if (text == "_")
        kind = Kind::wildcard;
    else if (!text.empty() && text[0] >= 'a' && text[0] <= 'z')
        kind = Kind::variable;
    else
        kind = Kind::constant;
}

Atom atom(std::string relation, std::vector<Term> terms)
{
    return Atom{std::move(relation), std::move(terms), false};
}

Constraint eq(Term lhs, Term rhs)
{
    return {std::move(lhs), std::move(rhs), true};
}

Constraint ne(Term lhs, Term rhs)
{
    return {std::move(lhs), std::move(rhs), false};
}

namespace {

std::string term_text(const Term& t)
{
    if (t.is_wildcard())
        return "_";
    if (t.is_const())
        return "\"" + t.text + "\"";
    return t.text;
}

std::string atom_text(const Atom& a)
{
    std::string s = a.negated ? "!" : "";
    s += a.relation + "(";
    for (std::size_t i = 0; i < a.terms.size(); ++i)
        s += (i ? ", " : "") + term_text(a.terms[i]);
    return s + ")";
}

std::string join_names(const std::vector<std::string>& names, const char* sep)
{
    std::string s;
    for (std::size_t i = 0; i < names.size(); ++i)
        s += (i ? sep : "") + names[i];
    return s;
}

}  // namespace

std::string to_string(const Rule& rule)
{
    std::string s = atom_text(rule.head) + " :- ";
    bool first = true;
    for (const auto& a : rule.body) {
        s += (first ? "" : ", ") + atom_text(a);
        first = false;
    }
    for (const auto& c : rule.constraints) {
        s += (first ? "" : ", ") + term_text(c.lhs) + (c.equal ? " = " : " != ") + term_text(c.rhs);
        first = false;
    }
    return s + ".";
}

Program& Program::input(const std::string& name, RelationSchema schema)
{
    declarations[name] = std::move(schema);
    inputs.insert(name);
    return *this;
}

Program& Program::relation(const std::string& name, RelationSchema schema)
{
    declarations[name] = std::move(schema);
    return *this;
}

Program& Program::output(const std::string& name, RelationSchema schema)
{
    declarations[name] = std::move(schema);
    outputs.insert(name);
    return *this;
}

Program& Program::rule(Atom head, std::vector<Literal> body)
{
    Rule r{std::move(head), {}, {}};
    for (auto& lit : body) {
        if (auto* a = std::get_if<Atom>(&lit))
            r.body.push_back(std::move(*a));
        else
            r.constraints.push_back(std::get<Constraint>(std::move(lit)));
    }
    rules.push_back(std::move(r));
    return *this;
}

void Program::validate() const
{
    auto check_atom = [&](const Rule& r, const Atom& a) {
        auto it = declarations.find(a.relation);
        if (it == declarations.end())
            throw ProgramError("undeclared relation '" + a.relation + "' in " + to_string(r));
        if (it->second.arity() != a.terms.size())
            throw ProgramError("arity mismatch for '" + a.relation + "' in " + to_string(r));
    };
    for (const auto& name : inputs) {
        if (!declarations.contains(name))
            throw ProgramError("undeclared input '" + name + "'");
    }
    for (const auto& name : outputs) {
        if (!declarations.contains(name))
            throw ProgramError("undeclared output '" + name + "'");
    }
    for (const auto& r : rules) {
        check_atom(r, r.head);
        if (r.head.negated)
            throw ProgramError("negated head in " + to_string(r));
        if (inputs.contains(r.head.relation))
            throw ProgramError("rule defines input relation in " + to_string(r));
        std::set<std::string> positive;
        for (const auto& a : r.body) {
            check_atom(r, a);
            if (!a.negated) {
                for (const auto& t : a.terms) {
                    if (t.is_var())
                        positive.insert(t.text);
                }
            }
        }
        auto restricted = [&](const Term& t, const char* where) {
            if (t.is_var() && !positive.contains(t.text))
                throw ProgramError("variable '" + t.text + "' in " + where +
                                   " is not bound by a positive atom in " + to_string(r));
        };
        for (const auto& t : r.head.terms) {
            if (t.is_wildcard())
                throw ProgramError("wildcard in head of " + to_string(r));
            restricted(t, "head");
        }
        for (const auto& a : r.body) {
            if (a.negated) {
                for (const auto& t : a.terms)
                    restricted(t, "negated atom");
            }
        }
        for (const auto& c : r.constraints) {
            if (c.lhs.is_wildcard() || c.rhs.is_wildcard())
                throw ProgramError("wildcard in constraint of " + to_string(r));
            restricted(c.lhs, "constraint");
            restricted(c.rhs, "constraint");
        }
    }
}

UnstratifiableError::UnstratifiableError(std::vector<std::string> cycle)
  : ProgramError("unstratifiable program: negation inside cycle " + join_names(cycle, " -> ")),
    cycle_(std::move(cycle))
{}

std::vector<Stratum> stratify(const Program& program)
{
    program.validate();

    std::vector<std::string> names;
    std::map<std::string, int, std::less<>> id;
    for (const auto& [name, schema] : program.declarations) {
        id.emplace(name, static_cast<int>(names.size()));
        names.push_back(name);
    }
    const auto n = names.size();
    // Edges body -> head, with a flag for negation.
    std::vector<std::vector<std::pair<int, bool>>> out(n);
    for (const auto& r : program.rules) {
        const int h = id.at(r.head.relation);
        for (const auto& a : r.body)
            out[static_cast<std::size_t>(id.at(a.relation))].emplace_back(h, a.negated);
    }

    // Tarjan's SCC, iterative.
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<char> on_stack(n, 0);
    std::vector<int> stack;
    std::vector<std::vector<int>> components;
    int counter = 0;
    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] >= 0)
            continue;
        std::vector<std::pair<int, std::size_t>> call{{static_cast<int>(root), 0}};
        while (!call.empty()) {
            auto& [v, i] = call.back();
            const auto vu = static_cast<std::size_t>(v);
            if (i == 0 && index[vu] < 0) {
                index[vu] = low[vu] = counter++;
                stack.push_back(v);
                on_stack[vu] = 1;
            }
            if (i < out[vu].size()) {
                const int w = out[vu][i++].first;
                const auto wu = static_cast<std::size_t>(w);
                if (index[wu] < 0)
                    call.emplace_back(w, 0);
                else if (on_stack[wu])
                    low[vu] = std::min(low[vu], index[wu]);
                continue;
            }
            if (low[vu] == index[vu]) {
                std::vector<int> c;
                int w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[static_cast<std::size_t>(w)] = 0;
                    comp[static_cast<std::size_t>(w)] = static_cast<int>(components.size());
                    c.push_back(w);
                } while (w != v);
                components.push_back(std::move(c));
            }
            const int done = v;
            call.pop_back();
            if (!call.empty()) {
                const auto pu = static_cast<std::size_t>(call.back().first);
                low[pu] = std::min(low[pu], low[static_cast<std::size_t>(done)]);
            }
        }
    }

    for (std::size_t u = 0; u < n; ++u) {
        for (const auto& [w, neg] : out[u]) {
            if (!neg || comp[u] != comp[static_cast<std::size_t>(w)])
                continue;
            // Close the cycle: path w -> ... -> u inside the component.
            std::map<int, int> parent{{w, w}};
            std::deque<int> q{w};
            while (!q.empty() && !parent.contains(static_cast<int>(u))) {
                int x = q.front();
                q.pop_front();
                for (const auto& [y, unused] : out[static_cast<std::size_t>(x)]) {
                    if (comp[static_cast<std::size_t>(y)] == comp[u] && !parent.contains(y)) {
                        parent[y] = x;
                        q.push_back(y);
                    }
                }
            }
            std::vector<std::string> path;
            for (int x = static_cast<int>(u);; x = parent.at(x)) {
                path.push_back(names[static_cast<std::size_t>(x)]);
                if (x == w)
                    break;
            }
            std::reverse(path.begin(), path.end());
            std::vector<std::string> cycle{names[u]};
            cycle.insert(cycle.end(), path.begin(), path.end());
            throw UnstratifiableError(std::move(cycle));
        }
    }

    // Tarjan emits sinks first; dependencies flow body -> head, so reverse.
    std::vector<Stratum> strata;
    for (auto it = components.rbegin(); it != components.rend(); ++it) {
        Stratum s;
        for (int v : *it)
            s.relations.insert(names[static_cast<std::size_t>(v)]);
        for (std::size_t r = 0; r < program.rules.size(); ++r) {
            if (s.relations.contains(program.rules[r].head.relation))
                s.rules.push_back(r);
        }
        if (!s.rules.empty())
            strata.push_back(std::move(s));
    }
    return strata;
}

namespace {

using Sym = std::uint32_t;
using Row = std::vector<Sym>;

struct RowHash
{
    std::size_t operator()(const Row& r) const noexcept
    {
        std::uint64_t h = 0xcbf29ce484222325ULL ^ r.size();
        for (Sym s : r) {
            h ^= s;
            h *= 0x100000001b3ULL;
            h ^= h >> 29;
        }
        return static_cast<std::size_t>(h);
    }
};

class SymbolTable
{
public:
    Sym intern(const std::string& s)
    {
        auto [it, fresh] = ids_.try_emplace(s, static_cast<Sym>(names_.size()));
        if (fresh)
            names_.push_back(&it->first);
        return it->second;
    }
    const std::string& name(Sym s) const { return *names_[s]; }

private:
    std::unordered_map<std::string, Sym> ids_;
    std::vector<const std::string*> names_;
};

class Relation
{
public:
    using Bucket = std::vector<const Row*>;

    bool insert(Row r)
    {
        auto [it, fresh] = set_.insert(std::move(r));
        if (!fresh)
            return false;
        const Row* p = &*it;
        rows_.push_back(p);
        for (auto& [mask, index] : indexes_)
            index[project(*p, mask)].push_back(p);
        return true;
    }

    bool contains(const Row& r) const { return set_.contains(r); }
    const Bucket& rows() const noexcept { return rows_; }
    bool empty() const noexcept { return rows_.empty(); }

    /// Rows whose columns in `mask` equal `key` (listed by ascending column).
    const Bucket& lookup(std::uint32_t mask, const Row& key) const
    {
        auto it = indexes_.find(mask);
        if (it == indexes_.end()) {
            it = indexes_.emplace(mask, Index{}).first;
            for (const Row* p : rows_)
                it->second[project(*p, mask)].push_back(p);
        }
        auto b = it->second.find(key);
        return b == it->second.end() ? empty_ : b->second;
    }

private:
    using Index = std::unordered_map<Row, Bucket, RowHash>;

    static Row project(const Row& r, std::uint32_t mask)
    {
        Row k;
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (mask & (1u << c))
                k.push_back(r[c]);
        }
        return k;
    }

    std::unordered_set<Row, RowHash> set_;
    Bucket rows_;
    mutable std::map<std::uint32_t, Index> indexes_;
    static inline const Bucket empty_{};
};

struct CTerm
{
    Term::Kind kind;
    std::uint32_t id;  // variable slot or symbol
};

struct CAtom
{
    std::string relation;
    std::vector<CTerm> terms;
};

struct CConstraint
{
    CTerm lhs, rhs;
    bool equal;
};

struct CRule
{
    CAtom head;
    std::vector<CAtom> positive;
    std::vector<CAtom> negative;
    std::vector<CConstraint> constraints;
    std::size_t variables = 0;
};

class Engine
{
public:
    Engine(const Program& program, const FactBase& edb, Deadline deadline)
        : program_(program), deadline_(deadline)
    {
        program.validate();
        for (const auto& [name, schema] : program.declarations)
            relations_.try_emplace(name);
        for (const auto& name : program.inputs) {
            if (!edb.declared(name))
                continue;
            const auto& want = program.declarations.at(name);
            const auto& got = edb.schema(name);
            if (got.arity() != want.arity())
                throw SchemaError(name, "input arity " + std::to_string(got.arity()) +
                                            " does not match declared arity " +
                                            std::to_string(want.arity()));
            for (std::size_t c = 0; c < want.arity(); ++c) {
                if (got.columns[c] != want.columns[c])
                    throw SchemaError(name, "column " + std::to_string(c) + " is " +
                                                std::string(to_string(got.columns[c])) +
                                                ", declared " +
                                                std::string(to_string(want.columns[c])));
            }
            auto& rel = relations_.at(name);
            for (const auto& t : edb.relation(name)) {
                Row r;
                r.reserve(t.size());
                for (const auto& s : t)
                    r.push_back(symbols_.intern(s));
                rel.insert(std::move(r));
            }
        }
        for (const auto& r : program.rules)
            rules_.push_back(compile(r));
    }

    void run()
    {
        for (const auto& stratum : stratify(program_))
            run_stratum(stratum);
    }

    FactBase outputs() const
    {
        FactBase out;
        for (const auto& name : program_.outputs) {
            out.declare(name, program_.declarations.at(name));
            for (const Row* r : relations_.at(name).rows()) {
                Tuple t;
                t.reserve(r->size());
                for (Sym s : *r)
                    t.push_back(symbols_.name(s));
                out.insert(name, std::move(t));
            }
        }
        return out;
    }

private:
    using Pending = std::map<std::string, std::unordered_set<Row, RowHash>>;

    CRule compile(const Rule& r)
    {
        CRule c;
        std::map<std::string, std::uint32_t> slots;
        auto term = [&](const Term& t) -> CTerm {
            switch (t.kind) {
            case Term::Kind::variable: {
                auto [it, fresh] = slots.try_emplace(t.text, static_cast<std::uint32_t>(slots.size()));
                return {t.kind, it->second};
            }
            case Term::Kind::constant:
                return {t.kind, symbols_.intern(t.text)};
            case Term::Kind::wildcard:
                break;
            }
            return {Term::Kind::wildcard, 0};
        };
        auto catom = [&](const Atom& a) {
            CAtom out{a.relation, {}};
            for (const auto& t : a.terms)
                out.terms.push_back(term(t));
            return out;
        };
        for (const auto& a : r.body) {
            if (!a.negated)
                c.positive.push_back(catom(a));
        }
        for (const auto& a : r.body) {
            if (a.negated)
                c.negative.push_back(catom(a));
        }
        for (const auto& k : r.constraints)
            c.constraints.push_back({term(k.lhs), term(k.rhs), k.equal});
        c.head = catom(r.head);
        c.variables = slots.size();
        return c;
    }

    struct Plan
    {
        std::vector<const CAtom*> order;
        std::vector<const Relation*> sources;
        // checks_after[k]: negations/constraints first fully bound after step k
        // (index 0 = before any atom).
        std::vector<std::vector<const CAtom*>> neg_after;
        std::vector<std::vector<const CConstraint*>> cons_after;
    };

    Plan plan(const CRule& rule, std::optional<std::size_t> delta_atom, const Relation* delta) const
    {
        Plan p;
        if (delta_atom) {
            p.order.push_back(&rule.positive[*delta_atom]);
            p.sources.push_back(delta);
        }
        for (std::size_t i = 0; i < rule.positive.size(); ++i) {
            if (delta_atom && i == *delta_atom)
                continue;
            p.order.push_back(&rule.positive[i]);
            p.sources.push_back(&relations_.at(rule.positive[i].relation));
        }
        const auto steps = p.order.size() + 1;
        p.neg_after.resize(steps);
        p.cons_after.resize(steps);
        std::vector<std::size_t> bound_at(rule.variables, steps);
        for (std::size_t k = 0; k < p.order.size(); ++k) {
            for (const auto& t : p.order[k]->terms) {
                if (t.kind == Term::Kind::variable)
                    bound_at[t.id] = std::min(bound_at[t.id], k + 1);
            }
        }
        auto when = [&](const CTerm& t) {
            return t.kind == Term::Kind::variable ? bound_at[t.id] : std::size_t{0};
        };
        for (const auto& n : rule.negative) {
            std::size_t k = 0;
            for (const auto& t : n.terms)
                k = std::max(k, when(t));
            p.neg_after[k].push_back(&n);
        }
        for (const auto& c : rule.constraints)
            p.cons_after[std::max(when(c.lhs), when(c.rhs))].push_back(&c);
        return p;
    }

    bool checks_pass(const Plan& p, std::size_t step, const Row& binding) const
    {
        auto value = [&](const CTerm& t) { return t.kind == Term::Kind::variable ? binding[t.id] : t.id; };
        for (const auto* c : p.cons_after[step]) {
            if ((value(c->lhs) == value(c->rhs)) != c->equal)
                return false;
        }
        for (const auto* n : p.neg_after[step]) {
            const auto& rel = relations_.at(n->relation);
            std::uint32_t mask = 0;
            Row key;
            for (std::size_t col = 0; col < n->terms.size(); ++col) {
                if (n->terms[col].kind == Term::Kind::wildcard)
                    continue;
                mask |= 1u << col;
                key.push_back(value(n->terms[col]));
            }
            const bool present = mask == (1u << n->terms.size()) - 1 ? rel.contains(key)
                                                                       : !rel.lookup(mask, key).empty();
            if (present)
                return false;
        }
        return true;
    }

    void join(const CRule& rule, const Plan& p, std::size_t step, Row& binding,
              std::vector<char>& bound, std::unordered_set<Row, RowHash>& out) const
    {
        if (deadline_ && (++ticks_ & 0x3ff) == 0 && std::chrono::steady_clock::now() > *deadline_)
            throw Timeout("rule evaluation passed its deadline");
        if (step == p.order.size()) {
            Row head;
            head.reserve(rule.head.terms.size());
            for (const auto& t : rule.head.terms)
                head.push_back(t.kind == Term::Kind::variable ? binding[t.id] : t.id);
            if (!relations_.at(rule.head.relation).contains(head))
                out.insert(std::move(head));
            return;
        }
        const CAtom& a = *p.order[step];
        std::uint32_t mask = 0;
        Row key;
        for (std::size_t col = 0; col < a.terms.size(); ++col) {
            const auto& t = a.terms[col];
            if (t.kind == Term::Kind::constant ||
                (t.kind == Term::Kind::variable && bound[t.id])) {
                mask |= 1u << col;
                key.push_back(t.kind == Term::Kind::constant ? t.id : binding[t.id]);
            }
        }
        const auto& rows = mask == 0 ? p.sources[step]->rows() : p.sources[step]->lookup(mask, key);
        std::vector<std::uint32_t> fresh;
        for (const Row* row : rows) {
            fresh.clear();
            bool ok = true;
            for (std::size_t col = 0; col < a.terms.size() && ok; ++col) {
                const auto& t = a.terms[col];
                if (t.kind != Term::Kind::variable || (mask & (1u << col)))
                    continue;
                if (bound[t.id]) {
                    ok = binding[t.id] == (*row)[col];  // repeated variable within the atom
                }
                else {
                    bound[t.id] = 1;
                    binding[t.id] = (*row)[col];
                    fresh.push_back(t.id);
                }
            }
            if (ok && checks_pass(p, step + 1, binding))
                join(rule, p, step + 1, binding, bound, out);
            for (auto v : fresh)
                bound[v] = 0;
        }
    }

    void fire(const CRule& rule, const Plan& p, Pending& pending) const
    {
        Row binding(rule.variables, 0);
        std::vector<char> bound(rule.variables, 0);
        if (!checks_pass(p, 0, binding))
            return;
        join(rule, p, 0, binding, bound, pending[rule.head.relation]);
    }

    std::map<std::string, Relation> commit(Pending& pending)
    {
        std::map<std::string, Relation> delta;
        for (auto& [name, rows] : pending) {
            auto& rel = relations_.at(name);
            auto& d = delta[name];
            for (auto it = rows.begin(); it != rows.end();) {
                auto node = rows.extract(it++);
                if (rel.insert(node.value()))
                    d.insert(std::move(node.value()));
            }
        }
        return delta;
    }

    void run_stratum(const Stratum& stratum)
    {
        Pending pending;
        for (auto r : stratum.rules)
            fire(rules_[r], plan(rules_[r], std::nullopt, nullptr), pending);
        auto delta = commit(pending);

        auto any = [](const std::map<std::string, Relation>& d) {
            return std::any_of(d.begin(), d.end(), [](const auto& kv) { return !kv.second.empty(); });
        };
        while (any(delta)) {
            pending.clear();
            for (auto r : stratum.rules) {
                const auto& rule = rules_[r];
                for (std::size_t i = 0; i < rule.positive.size(); ++i) {
                    auto d = delta.find(rule.positive[i].relation);
                    if (d == delta.end() || d->second.empty())
                        continue;
                    fire(rule, plan(rule, i, &d->second), pending);
                }
            }
            delta = commit(pending);
        }
    }

    const Program& program_;
    Deadline deadline_;
    mutable std::uint64_t ticks_ = 0;
    SymbolTable symbols_;
    std::map<std::string, Relation, std::less<>> relations_;
    std::vector<CRule> rules_;
};

// Reference evaluator: strings, full scans, no indexes.
class NaiveEngine
{
public:
    NaiveEngine(const Program& program, const FactBase& edb) : program_(program)
    {
        program.validate();
        for (const auto& [name, schema] : program.declarations)
            relations_[name];
        for (const auto& name : program.inputs) {
            if (!edb.declared(name))
                continue;
            if (!(edb.schema(name) == program.declarations.at(name)))
                throw SchemaError(name, "input schema does not match declaration");
            relations_[name] = edb.relation(name);
        }
    }

    void run()
    {
        for (const auto& stratum : stratify(program_)) {
            for (bool changed = true; changed;) {
                changed = false;
                for (auto r : stratum.rules) {
                    std::set<Tuple> derived;
                    std::map<std::string, std::string> env;
                    derive(program_.rules[r], 0, env, derived);
                    auto& rel = relations_[program_.rules[r].head.relation];
                    for (auto& t : derived)
                        changed |= rel.insert(t).second;
                }
            }
        }
    }

    FactBase outputs() const
    {
        FactBase out;
        for (const auto& name : program_.outputs) {
            out.declare(name, program_.declarations.at(name));
            for (const auto& t : relations_.at(name))
                out.insert(name, t);
        }
        return out;
    }

private:
    using Env = std::map<std::string, std::string>;

    static const std::string& value(const Term& t, const Env& env)
    {
        return t.is_var() ? env.at(t.text) : t.text;
    }

    bool matches(const Atom& a, const Tuple& t, const Env& env) const
    {
        for (std::size_t i = 0; i < t.size(); ++i) {
            const auto& term = a.terms[i];
            if (term.is_wildcard())
                continue;
            if (value(term, env) != t[i])
                return false;
        }
        return true;
    }

    void derive(const Rule& rule, std::size_t i, Env& env, std::set<Tuple>& out) const
    {
        while (i < rule.body.size() && rule.body[i].negated)
            ++i;
        if (i == rule.body.size()) {
            for (const auto& a : rule.body) {
                if (!a.negated)
                    continue;
                for (const auto& t : relations_.at(a.relation)) {
                    if (matches(a, t, env))
                        return;
                }
            }
            for (const auto& c : rule.constraints) {
                if ((value(c.lhs, env) == value(c.rhs, env)) != c.equal)
                    return;
            }
            Tuple head;
            for (const auto& t : rule.head.terms)
                head.push_back(value(t, env));
            out.insert(std::move(head));
            return;
        }
        const Atom& a = rule.body[i];
        for (const auto& t : relations_.at(a.relation)) {
            Env next = env;
            bool ok = true;
            for (std::size_t c = 0; c < t.size() && ok; ++c) {
                const auto& term = a.terms[c];
                if (term.is_const())
                    ok = term.text == t[c];
                else if (term.is_var()) {
                    auto [it, fresh] = next.emplace(term.text, t[c]);
                    ok = fresh || it->second == t[c];
                }
            }
            if (ok)
                derive(rule, i + 1, next, out);
        }
    }

    const Program& program_;
    std::map<std::string, std::set<Tuple>> relations_;
};

}  // namespace

FactBase evaluate(const Program& program, const FactBase& edb, Deadline deadline)
{
    Engine engine(program, edb, deadline);
    engine.run();
    return engine.outputs();
}

FactBase naive_evaluate(const Program& program, const FactBase& edb)
{
    NaiveEngine engine(program, edb);
    engine.run();
    return engine.outputs();
}

}  // namespace evmlens::datalog
