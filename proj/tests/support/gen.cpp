// evmlens: static security analysis for EVM bytecode
// Copyright 2026 The evmlens Authors.
// Licensed under the Apache License, Version 2.0.
#include "gen.hpp"

#include <array>
#include <sstream>

namespace evmlens::testing {

std::string random_program(std::mt19937_64& rng, int chunks)
{
    auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
    auto label = [](int i) { return "L" + std::to_string(i); };
    static constexpr std::array body_ops{"ADD", "SUB", "MUL", "LT", "EQ", "ISZERO", "AND", "DUP1",
                                         "SWAP1", "POP", "CALLDATALOAD", "SLOAD", "CALLER",
                                         "CALLVALUE", "DUP2"};

    std::string src;
    for (int c = 0; c < chunks; ++c) {
        src += label(c) + ":\nJUMPDEST\n";
        const int n = pick(5);
        for (int i = 0; i < n; ++i) {
            if (pick(3) == 0)
                src += "PUSH1 " + std::to_string(pick(4)) + "\n";
            else
                src += std::string(body_ops[static_cast<std::size_t>(pick(body_ops.size()))]) + "\n";
        }
        const int target = pick(chunks);
        switch (pick(7)) {
        case 0:
            src += "PUSH2 @" + label(target) + "\nJUMP\n";
            break;
        case 1:
            src += "CALLDATASIZE\nPUSH2 @" + label(target) + "\nJUMPI\n";
            break;
        case 2:
            src += "STOP\n";
            break;
        case 3:
            // call: push the return label, jump to a callee that returns through the stack
            src += "PUSH2 @" + label(c + 1 < chunks ? c + 1 : 0) + "\nPUSH2 @" + label(target) +
                   "\nJUMP\n";
            break;
        case 4:
            src += "JUMP\n";  // return
            break;
        case 5:
            src += "PUSH1 0x00\nDUP1\nREVERT\n";
            break;
        default:
            break;  // fall through
        }
    }
    src += "STOP\n";
    return src;
}

std::string jump_maze(int subs, int callers, int depth)
{
    std::ostringstream out;
    for (int s = 0; s < subs; ++s)
        for (int i = 0; i < callers; ++i)
            out << "PUSH2 @r" << s << '_' << i << "\nPUSH2 @sub" << s << "_0\nJUMP\nr" << s << '_' << i
                << ":\nJUMPDEST\n";
    out << "STOP\n";
    for (int s = 0; s < subs; ++s) {
        for (int d = 0; d < depth; ++d) {
            out << "sub" << s << '_' << d << ":\nJUMPDEST\n";
            if (d + 1 < depth)
                out << "PUSH2 @b" << s << '_' << d << "\nPUSH2 @sub" << s << '_' << d + 1 << "\nJUMP\nb" << s
                    << '_' << d << ":\nJUMPDEST\n";
            out << "JUMP\n";
        }
    }
    return out.str();
}

}  // namespace evmlens::testing
