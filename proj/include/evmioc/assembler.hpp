// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "errors.hpp"
#include "opcodes.hpp"
#include "word.hpp"

#include <map>
#include <string>
#include <vector>

namespace evmioc
{
/// Two-pass assembler over the supported opcode subset. Jump targets are symbolic labels
/// encoded with a fixed-width PUSH (2 bytes by default, 3 for codes above 64 KiB).
class Assembler
{
public:
    explicit Assembler(unsigned label_width = 2) : label_width_(label_width)
    {
        if (label_width < 1 || label_width > 4)
            throw UsageError("label width must be 1..4 bytes");
    }

    std::uint64_t pc() const noexcept { return code_.size(); }

    Assembler& op(std::uint8_t opcode)
    {
        if (!is_supported(opcode) || is_push(opcode))
            throw UsageError("op(): unsupported or immediate-taking opcode " + mnemonic(opcode));
        code_.push_back(opcode);
        return *this;
    }

    /// PUSH with the smallest width that holds `v` (PUSH1 for zero).
    Assembler& push(const Word256& v)
    {
        const auto bytes = word_to_bytes(v);
        std::size_t first = 0;
        while (first < 31 && bytes[first] == 0)
            ++first;
        return push_bytes(ByteView(bytes).subspan(first));
    }

    /// PUSH with an explicit immediate width.
    Assembler& push_n(const Word256& v, unsigned width)
    {
        if (width < 1 || width > 32)
            throw UsageError("push width must be 1..32");
        if (width < 32 && (v >> (8 * width)) != 0)
            throw UsageError("immediate does not fit in PUSH" + std::to_string(width));
        const auto bytes = word_to_bytes(v);
        return push_bytes(ByteView(bytes).subspan(32 - width));
    }

    Assembler& push_address(const Address& a) { return push_bytes(a.bytes); }

    Assembler& push_label(const std::string& name)
    {
        fixups_.push_back({code_.size() + 1, name});
        code_.push_back(static_cast<std::uint8_t>(OP_PUSH1 + label_width_ - 1));
        code_.insert(code_.end(), label_width_, 0);
        return *this;
    }

    /// Defines `name` at the current offset and emits its JUMPDEST.
    Assembler& label(const std::string& name)
    {
        if (!labels_.emplace(name, code_.size()).second)
            throw UsageError("duplicate label " + name);
        code_.push_back(OP_JUMPDEST);
        return *this;
    }

    Assembler& jump(const std::string& name) { return push_label(name).op(OP_JUMP); }
    Assembler& jumpi(const std::string& name) { return push_label(name).op(OP_JUMPI); }

    /// Records the offset of the next emitted instruction under `name` (used for VULN_LOCS).
    Assembler& mark(const std::string& name)
    {
        marks_[name].push_back(code_.size());
        return *this;
    }

    const std::map<std::string, std::vector<std::uint64_t>>& marks() const noexcept { return marks_; }

    std::uint64_t marked(const std::string& name) const
    {
        const auto it = marks_.find(name);
        if (it == marks_.end() || it->second.size() != 1)
            throw UsageError("mark " + name + " is not defined exactly once");
        return it->second.front();
    }

    std::uint64_t label_offset(const std::string& name) const
    {
        const auto it = labels_.find(name);
        if (it == labels_.end())
            throw UsageError("undefined label " + name);
        return it->second;
    }

    Bytes assemble() const
    {
        Bytes out = code_;
        for (const auto& fix : fixups_)
        {
            std::uint64_t target = label_offset(fix.label);
            if (label_width_ < 8 && (target >> (8 * label_width_)) != 0)
                throw UsageError("label " + fix.label + " out of range for PUSH" + std::to_string(label_width_));
            for (unsigned i = 0; i < label_width_; ++i)
            {
                out[fix.at + label_width_ - 1 - i] = static_cast<std::uint8_t>(target & 0xff);
                target >>= 8;
            }
        }
        return out;
    }

private:
    struct Fixup
    {
        std::size_t at;
        std::string label;
    };

    Assembler& push_bytes(ByteView imm)
    {
        if (imm.empty() || imm.size() > 32)
            throw UsageError("push immediate must be 1..32 bytes");
        code_.push_back(static_cast<std::uint8_t>(OP_PUSH1 + imm.size() - 1));
        code_.insert(code_.end(), imm.begin(), imm.end());
        return *this;
    }

    unsigned label_width_;
    Bytes code_;
    std::vector<Fixup> fixups_;
    std::map<std::string, std::uint64_t> labels_;
    std::map<std::string, std::vector<std::uint64_t>> marks_;
};

struct Instruction
{
    std::uint64_t pc = 0;
    std::uint8_t op = OP_STOP;
    Bytes immediate;
};

inline std::vector<Instruction> decode(ByteView code)
{
    std::vector<Instruction> out;
    for (std::size_t pc = 0; pc < code.size();)
    {
        Instruction ins{pc, code[pc], {}};
        std::size_t width = is_push(ins.op) ? static_cast<std::size_t>(ins.op - OP_PUSH1 + 1) : 0;
        const std::size_t end = std::min(code.size(), pc + 1 + width);
        ins.immediate.assign(code.begin() + static_cast<std::ptrdiff_t>(pc + 1),
                             code.begin() + static_cast<std::ptrdiff_t>(end));
        out.push_back(std::move(ins));
        pc += 1 + width;
    }
    return out;
}

/// One line per instruction: "<pc> <MNEMONIC> [0ximm]", with an optional annotation per pc.
inline std::string disassemble(ByteView code, const std::map<std::uint64_t, std::string>& notes = {})
{
    std::string out;
    for (const auto& ins : decode(code))
    {
        out += std::to_string(ins.pc);
        out += '\t';
        out += mnemonic(ins.op);
        if (!ins.immediate.empty())
        {
            out += ' ';
            out += to_hex(ins.immediate, true);
        }
        if (const auto it = notes.find(ins.pc); it != notes.end())
        {
            out += "\t; ";
            out += it->second;
        }
        out += '\n';
    }
    return out;
}
}  // namespace evmioc
