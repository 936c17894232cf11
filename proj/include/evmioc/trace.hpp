// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "opcodes.hpp"
#include "word.hpp"

#include <optional>
#include <string>
#include <vector>

namespace evmioc
{
struct StorageWrite
{
    Word256 key;
    Word256 value;

    bool operator==(const StorageWrite&) const = default;
};

/// Message-call details attached to CALL / STATICCALL / DELEGATECALL steps.
struct CallInfo
{
    Address callee;
    Wei value = 0;
    /// Status pushed back to the caller; unknown when the trace ends before the caller resumes.
    std::optional<Word256> return_status;
    Bytes input;

    bool operator==(const CallInfo&) const = default;
};

/// One structured-log record: the machine state *before* the instruction executes.
struct TraceStep
{
    std::uint64_t pc = 0;
    std::uint8_t op = OP_STOP;
    Gas gas = 0;
    Gas gas_cost = 0;
    std::uint32_t depth = 1;
    /// Operand stack, top of stack last.
    std::vector<Word256> stack;
    std::optional<StorageWrite> storage_write;
    std::optional<CallInfo> call;
    /// Frame memory; recorded on call-generating steps only.
    std::optional<Bytes> memory;

    bool operator==(const TraceStep&) const = default;

    /// i-th stack item counted from the top (0 = top).
    const Word256& peek(std::size_t i) const { return stack[stack.size() - 1 - i]; }
};

/// Top-level fields of a trace document.
struct TraceSummary
{
    Gas gas_used = 0;
    bool failed = false;
    Bytes return_value;

    bool operator==(const TraceSummary&) const = default;
};

struct TraceDocument
{
    TraceSummary summary;
    std::vector<TraceStep> steps;

    bool operator==(const TraceDocument&) const = default;
};

namespace detail
{
inline void append_step_json(std::string& out, const TraceStep& s)
{
    out += "{\"pc\":";
    out += std::to_string(s.pc);
    out += ",\"op\":\"";
    out += mnemonic(s.op);
    out += "\",\"gas\":";
    out += std::to_string(s.gas);
    out += ",\"gasCost\":";
    out += std::to_string(s.gas_cost);
    out += ",\"depth\":";
    out += std::to_string(s.depth);
    out += ",\"stack\":[";
    for (std::size_t i = 0; i < s.stack.size(); ++i)
    {
        if (i != 0)
            out += ',';
        out += '"';
        out += to_hex_quantity(s.stack[i]);
        out += '"';
    }
    out += ']';
    if (s.memory)
    {
        out += ",\"memory\":[";
        const Bytes& m = *s.memory;
        for (std::size_t off = 0; off < m.size(); off += 32)
        {
            if (off != 0)
                out += ',';
            out += '"';
            std::array<std::uint8_t, 32> word{};
            std::copy_n(m.begin() + static_cast<std::ptrdiff_t>(off), std::min<std::size_t>(32, m.size() - off),
                        word.begin());
            out += to_hex(word);
            out += '"';
        }
        out += ']';
    }
    if (s.storage_write)
    {
        out += ",\"storage\":{\"";
        out += to_hex_word(s.storage_write->key);
        out += "\":\"";
        out += to_hex_word(s.storage_write->value);
        out += "\"}";
    }
    out += '}';
}
}  // namespace detail

/// Serializes a trace in the structured-log interchange format (docs/formats.md).
/// Output is byte-deterministic: fixed key order, no whitespace.
inline std::string serialize_trace(const TraceSummary& summary, const std::vector<TraceStep>& steps)
{
    std::string out;
    out.reserve(64 + steps.size() * 96);
    out += "{\"gas\":";
    out += std::to_string(summary.gas_used);
    out += ",\"failed\":";
    out += summary.failed ? "true" : "false";
    out += ",\"returnValue\":\"";
    out += to_hex(summary.return_value);
    out += "\",\"structLogs\":[";
    for (std::size_t i = 0; i < steps.size(); ++i)
    {
        if (i != 0)
            out += ',';
        detail::append_step_json(out, steps[i]);
    }
    out += "]}";
    return out;
}

inline std::string serialize_trace(const TraceDocument& doc)
{
    return serialize_trace(doc.summary, doc.steps);
}
}  // namespace evmioc
