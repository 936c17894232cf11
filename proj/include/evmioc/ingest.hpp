// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "codec.hpp"
#include "errors.hpp"
#include "opcodes.hpp"
#include "state.hpp"
#include "trace.hpp"
#include "transaction.hpp"

#include <json.hpp>

#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace evmioc
{
struct ParseOptions
{
    /// Pre-filtered traces (custom tracer mode) skip steps, so pc continuity is not checked.
    bool allow_gaps = false;
};

namespace detail
{
inline std::uint8_t opcode_by_name(std::string_view name, std::size_t index)
{
    static const auto table = [] {
        std::unordered_map<std::string, std::uint8_t> m;
        for (unsigned op = 0; op < 256; ++op)
            m.emplace(mnemonic(static_cast<std::uint8_t>(op)), static_cast<std::uint8_t>(op));
        return m;
    }();
    const auto it = table.find(std::string(name));
    if (it == table.end())
        throw ParseError("unknown opcode '" + std::string(name) + "'", index);
    return it->second;
}

/// Streams a trace document straight into TraceSteps without building a DOM.
class TraceSax final : public nlohmann::json_sax<Json>
{
public:
    TraceDocument doc;

    bool null() override { return scalar(); }
    bool boolean(bool v) override
    {
        if (skip_ == 0 && ctx_ == Ctx::root && key_ == "failed")
        {
            doc.summary.failed = v;
            return true;
        }
        return scalar();
    }
    bool number_integer(number_integer_t v) override
    {
        if (v < 0 && skip_ == 0 && (ctx_ == Ctx::step || ctx_ == Ctx::root))
            throw ParseError("negative number in field '" + key_ + "'", index());
        return number(static_cast<std::uint64_t>(v));
    }
    bool number_unsigned(number_unsigned_t v) override { return number(v); }
    bool number_float(number_float_t, const string_t&) override
    {
        if (skip_ == 0 && (ctx_ == Ctx::step || ctx_ == Ctx::root))
            throw ParseError("non-integer number in field '" + key_ + "'", index());
        return scalar();
    }
    bool binary(binary_t&) override { return scalar(); }

    bool string(string_t& s) override
    {
        if (skip_ > 0)
            return scalar();
        try
        {
            switch (ctx_)
            {
            case Ctx::root:
                if (key_ == "returnValue")
                    doc.summary.return_value = bytes_from_hex(s);
                return true;
            case Ctx::step:
                if (key_ == "op")
                {
                    step_.op = opcode_by_name(s, index());
                    seen_ |= kOp;
                }
                return true;
            case Ctx::stack:
                step_.stack.push_back(word_from_hex(s));
                return true;
            case Ctx::memory:
            {
                const Bytes word = bytes_from_hex(s);
                if (!step_.memory)
                    step_.memory.emplace();
                step_.memory->insert(step_.memory->end(), word.begin(), word.end());
                return true;
            }
            case Ctx::storage:
                if (step_.storage_write)
                    throw ParseError("more than one storage entry in a step", index());
                step_.storage_write = StorageWrite{word_from_hex(key_), word_from_hex(s)};
                return true;
            default:
                throw ParseError("unexpected string", index());
            }
        }
        catch (const ParseError& e)
        {
            if (e.index() == 0 && index() != 0)
                throw ParseError(e.what(), index());
            throw;
        }
    }

    bool start_object(std::size_t) override
    {
        if (skip_ > 0)
            return ++skip_, true;
        switch (ctx_)
        {
        case Ctx::start:
            ctx_ = Ctx::root;
            return true;
        case Ctx::logs:
            ctx_ = Ctx::step;
            step_ = TraceStep{};
            seen_ = 0;
            return true;
        case Ctx::step:
            if (key_ == "storage")
            {
                ctx_ = Ctx::storage;
                return true;
            }
            return ++skip_, true;
        case Ctx::root:
            return ++skip_, true;
        default:
            throw ParseError("unexpected object", index());
        }
    }

    bool key(string_t& k) override
    {
        if (skip_ == 0)
            key_ = k;
        return true;
    }

    bool end_object() override
    {
        if (skip_ > 0)
            return end_skipped();
        switch (ctx_)
        {
        case Ctx::storage:
            ctx_ = Ctx::step;
            key_.clear();
            return true;
        case Ctx::step:
            if ((seen_ & kRequired) != kRequired)
                throw ParseError("structLog entry lacks one of pc/op/gas/depth", index());
            doc.steps.push_back(std::move(step_));
            ctx_ = Ctx::logs;
            return true;
        case Ctx::root:
            ctx_ = Ctx::done;
            return true;
        default:
            throw ParseError("unbalanced object", index());
        }
    }

    bool start_array(std::size_t) override
    {
        if (skip_ > 0)
            return ++skip_, true;
        if (ctx_ == Ctx::root && key_ == "structLogs")
        {
            ctx_ = Ctx::logs;
            seen_logs_ = true;
            return true;
        }
        if (ctx_ == Ctx::step && key_ == "stack")
        {
            ctx_ = Ctx::stack;
            return true;
        }
        if (ctx_ == Ctx::step && key_ == "memory")
        {
            ctx_ = Ctx::memory;
            step_.memory.emplace();
            return true;
        }
        if (ctx_ == Ctx::step || ctx_ == Ctx::root)
            return ++skip_, true;
        throw ParseError("unexpected array", index());
    }

    bool end_array() override
    {
        if (skip_ > 0)
            return end_skipped();
        switch (ctx_)
        {
        case Ctx::logs:
            ctx_ = Ctx::root;
            key_.clear();
            return true;
        case Ctx::stack:
        case Ctx::memory:
            ctx_ = Ctx::step;
            return true;
        default:
            throw ParseError("unbalanced array", index());
        }
    }

    bool parse_error(std::size_t position, const std::string&, const nlohmann::detail::exception& ex) override
    {
        throw ParseError("malformed trace JSON at byte " + std::to_string(position) + ": " + ex.what(), index());
    }

    bool complete() const { return ctx_ == Ctx::done && seen_logs_; }

private:
    enum class Ctx
    {
        start,
        root,
        logs,
        step,
        stack,
        memory,
        storage,
        done,
    };
    static constexpr unsigned kPc = 1, kOp = 2, kGas = 4, kDepth = 8, kRequired = 15;

    std::size_t index() const { return doc.steps.size(); }

    bool scalar() { return true; }

    bool end_skipped()
    {
        --skip_;
        return true;
    }

    bool number(std::uint64_t v)
    {
        if (skip_ > 0)
            return true;
        if (ctx_ == Ctx::root)
        {
            if (key_ == "gas")
                doc.summary.gas_used = static_cast<Gas>(v);
            return true;
        }
        if (ctx_ != Ctx::step)
            throw ParseError("unexpected number", index());
        if (key_ == "pc")
            step_.pc = v, seen_ |= kPc;
        else if (key_ == "gas")
            step_.gas = static_cast<Gas>(v), seen_ |= kGas;
        else if (key_ == "gasCost")
            step_.gas_cost = static_cast<Gas>(v);
        else if (key_ == "depth")
        {
            if (v == 0 || v > kMaxCallDepth + 1)
                throw ParseError("depth out of range", index());
            step_.depth = static_cast<std::uint32_t>(v);
            seen_ |= kDepth;
        }
        return true;
    }

    Ctx ctx_ = Ctx::start;
    int skip_ = 0;
    std::string key_;
    TraceStep step_;
    unsigned seen_ = 0;
    bool seen_logs_ = false;
};

inline std::size_t call_arg_base(std::uint8_t op)
{
    return op == OP_CALL ? 3 : 2;  // index of argsOffset counted from the top
}

/// Message-call details a tracer leaves implicit: callee and value from the stack, input from
/// memory, and the status the caller observed on resuming.
inline void derive_call_info(std::vector<TraceStep>& steps)
{
    std::vector<std::size_t> pending;  // call steps awaiting their caller's resumption
    for (std::size_t i = 0; i < steps.size(); ++i)
    {
        TraceStep& s = steps[i];
        while (!pending.empty() && steps[pending.back()].depth >= s.depth)
        {
            TraceStep& call = steps[pending.back()];
            if (call.depth == s.depth && !s.stack.empty())
                call.call->return_status = s.stack.back();
            pending.pop_back();
        }
        if (!is_call(s.op) || s.stack.size() < op_info(s.op).inputs || s.gas < s.gas_cost)
            continue;
        CallInfo info;
        info.callee = Address::from_word(s.peek(1));
        info.value = s.op == OP_CALL ? s.peek(2) : Wei{0};
        if (s.memory)
        {
            const std::size_t base = call_arg_base(s.op);
            const Word256 off = s.peek(base), size = s.peek(base + 1);
            if (size != 0 && off < Word256{s.memory->size()} && size <= Word256{kMaxMemoryBytes})
            {
                const auto o = static_cast<std::size_t>(off), n = static_cast<std::size_t>(size);
                info.input.assign(n, 0);
                const std::size_t avail = std::min(n, s.memory->size() - o);
                std::copy_n(s.memory->begin() + static_cast<std::ptrdiff_t>(o), avail, info.input.begin());
            }
            else if (size != 0 && size <= Word256{kMaxMemoryBytes})
                info.input.assign(static_cast<std::size_t>(size), 0);
        }
        s.call = std::move(info);
        pending.push_back(i);
    }
}

inline void validate_steps(const std::vector<TraceStep>& steps, const ParseOptions& opt)
{
    for (std::size_t i = 0; i < steps.size(); ++i)
    {
        const TraceStep& s = steps[i];
        if (i == 0)
        {
            if (s.depth != 1)
                throw ParseError("trace must start at depth 1", i);
            continue;
        }
        const TraceStep& prev = steps[i - 1];
        if (s.depth > prev.depth + 1)
            throw ParseError("depth jumps from " + std::to_string(prev.depth) + " to " + std::to_string(s.depth), i);
        if (s.depth == prev.depth + 1 && !is_call(prev.op))
            throw ParseError("depth increases without a call", i);
        if (!opt.allow_gaps && s.depth == prev.depth && prev.op != OP_JUMP && prev.op != OP_JUMPI && s.pc <= prev.pc)
            throw ParseError("non-monotonic pc " + std::to_string(s.pc) + " after " + std::to_string(prev.pc), i);
    }
}
}  // namespace detail

/// Parses a structured-log trace document (see docs/formats.md).
inline TraceDocument parse_struct_logs(std::string_view json, const ParseOptions& opt = {})
{
    detail::TraceSax sax;
    const bool ok = nlohmann::json::sax_parse(json, &sax, nlohmann::json::input_format_t::json, true);
    if (!ok || !sax.complete())
        throw ParseError("trace document lacks a structLogs array", sax.doc.steps.size());
    detail::validate_steps(sax.doc.steps, opt);
    detail::derive_call_info(sax.doc.steps);
    return std::move(sax.doc);
}

/// Declarative custom-tracer filter: steps whose pc is listed, plus call/return boundaries.
struct TracerSpec
{
    std::set<std::uint64_t> pcs;
    bool include_call_boundaries = true;

    bool operator==(const TracerSpec&) const = default;

    Json to_json() const { return {{"pcs", pcs}, {"includeCallBoundaries", include_call_boundaries}}; }

    static TracerSpec from_json(const Json& j)
    {
        TracerSpec t;
        for (const auto& pc : codec::require(j, "pcs"))
            t.pcs.insert(pc.get<std::uint64_t>());
        t.include_call_boundaries = j.value("includeCallBoundaries", true);
        return t;
    }

    std::string canonical() const { return to_json().dump(); }
};

inline constexpr const char* kPcFilterTracer = "pcFilterTracer";

/// Keeps step i when its pc is in the set, or (with boundaries) when it is a call, follows a
/// call, changes depth, or precedes a depth decrease. The pc set is matched in every frame.
inline TraceDocument filter_trace(const TraceDocument& doc, const TracerSpec& spec)
{
    TraceDocument out;
    out.summary = doc.summary;
    const auto& s = doc.steps;
    for (std::size_t i = 0; i < s.size(); ++i)
    {
        bool keep = spec.pcs.contains(s[i].pc);
        if (!keep && spec.include_call_boundaries)
            keep = is_call(s[i].op) || i == 0 || (is_call(s[i - 1].op)) || s[i].depth != s[i - 1].depth ||
                   (i + 1 < s.size() && s[i + 1].depth < s[i].depth);
        if (keep)
            out.steps.push_back(s[i]);
    }
    return out;
}

// --- reconstruction -----------------------------------------------------------------------

/// One activation record recovered from the trace.
struct Frame
{
    Address id;            ///< storage context
    Address code_address;  ///< where the executing code lives
    std::uint32_t depth = 1;
    int parent = -1;
    std::size_t entry_step = 0;  ///< raw index of the first step in this frame
    std::size_t journal_mark = 0;
};

struct ReconstructedStep
{
    std::size_t raw_index = 0;
    const TraceStep* step = nullptr;
    int frame = 0;

    const TraceStep& operator*() const { return *step; }
    const TraceStep* operator->() const { return step; }
};

/// Storage view of the transaction so far: archived pre-state plus the trace's writes.
class RunningState final : public StateView
{
public:
    explicit RunningState(const StateView* pre = nullptr) : pre_(pre) {}

    Word256 storage(const Address& a, const Word256& key) const override
    {
        const auto it = writes_.find({a, key});
        if (it != writes_.end())
            return it->second;
        return pre_ != nullptr ? pre_->storage(a, key) : Word256{0};
    }

    Wei balance(const Address& a) const override { return pre_ != nullptr ? pre_->balance(a) : Wei{0}; }

    void write(const Address& a, const Word256& key, const Word256& value)
    {
        const auto it = writes_.find({a, key});
        journal_.push_back({a, key, it == writes_.end() ? std::nullopt : std::optional<Word256>(it->second)});
        writes_[{a, key}] = value;
    }

    std::size_t mark() const noexcept { return journal_.size(); }

    void revert_to(std::size_t mark)
    {
        while (journal_.size() > mark)
        {
            const auto& e = journal_.back();
            if (e.previous)
                writes_[{e.account, e.key}] = *e.previous;
            else
                writes_.erase({e.account, e.key});
            journal_.pop_back();
        }
    }

    const std::map<std::pair<Address, Word256>, Word256>& writes() const noexcept { return writes_; }

private:
    struct Entry
    {
        Address account;
        Word256 key;
        std::optional<Word256> previous;
    };
    const StateView* pre_;
    std::map<std::pair<Address, Word256>, Word256> writes_;
    std::vector<Entry> journal_;
};

struct Reconstruction
{
    Hash32 tx_hash;
    const TraceDocument* doc = nullptr;
    std::vector<Frame> frames;
    std::vector<ReconstructedStep> steps;
    RunningState state;

    bool failed() const { return doc->summary.failed; }

    const Frame& frame_of(const ReconstructedStep& s) const { return frames[static_cast<std::size_t>(s.frame)]; }

    /// Activation-record ids from the outermost frame to the executing one.
    std::vector<Address> frame_ids(const ReconstructedStep& s) const
    {
        std::vector<Address> ids;
        for (int f = s.frame; f >= 0; f = frames[static_cast<std::size_t>(f)].parent)
            ids.push_back(frames[static_cast<std::size_t>(f)].id);
        std::reverse(ids.begin(), ids.end());
        return ids;
    }
};

/// Assigns every step its executing frame: depth-1 frames run tx.to; CALL/STATICCALL frames
/// run the callee in its own context; DELEGATECALL frames keep the caller's id.
inline Reconstruction reconstruct(const TraceDocument& doc, const Transaction& tx, const StateView* pre = nullptr)
{
    Reconstruction r{tx.hash, &doc, {}, {}, RunningState{pre}};
    std::vector<int> active;
    const auto close_frames = [&](std::uint32_t depth) {
        while (active.size() > depth)
        {
            const Frame& done = r.frames[static_cast<std::size_t>(active.back())];
            active.pop_back();
            const TraceStep& call_step = doc.steps[done.entry_step - 1];
            // entry_step - 1 is the caller's call step in a full trace; in a filtered trace
            // the call step is kept as a boundary and directly precedes the entry as well.
            if (call_step.call && call_step.call->return_status && *call_step.call->return_status == 0)
                r.state.revert_to(done.journal_mark);
        }
    };
    r.steps.reserve(doc.steps.size());
    for (std::size_t i = 0; i < doc.steps.size(); ++i)
    {
        const TraceStep& s = doc.steps[i];
        if (i == 0)
        {
            if (s.depth != 1)
                throw ReconstructionError("first step must execute at depth 1", i);
            r.frames.push_back(Frame{tx.to, tx.to, 1, -1, 0, 0});
            active.push_back(0);
        }
        else if (s.depth == active.size() + 1)
        {
            const TraceStep& prev = doc.steps[i - 1];
            if (!prev.call)
                throw ReconstructionError("frame entered without a readable call on the preceding step", i);
            const Frame& caller = r.frames[static_cast<std::size_t>(active.back())];
            Frame f;
            f.code_address = prev.call->callee;
            f.id = prev.op == OP_DELEGATECALL ? caller.id : prev.call->callee;
            f.depth = s.depth;
            f.parent = active.back();
            f.entry_step = i;
            f.journal_mark = r.state.mark();
            r.frames.push_back(f);
            active.push_back(static_cast<int>(r.frames.size() - 1));
        }
        else if (s.depth <= active.size())
            close_frames(s.depth);
        else
            throw ReconstructionError("depth bookkeeping mismatch: depth " + std::to_string(s.depth) + " with " +
                                          std::to_string(active.size()) + " open frames",
                                      i);

        const int frame = active.back();
        r.steps.push_back(ReconstructedStep{i, &s, frame});
        if (s.op == OP_SSTORE && s.stack.size() >= 2)
        {
            const StorageWrite w = s.storage_write ? *s.storage_write : StorageWrite{s.peek(0), s.peek(1)};
            r.state.write(r.frames[static_cast<std::size_t>(frame)].id, w.key, w.value);
        }
    }
    if (doc.summary.failed)
        r.state.revert_to(0);
    return r;
}

/// Tracks which frames may be inspected: the executing frame is enabled, frames with a
/// call in flight are disabled until the call returns.
class ContextTracker
{
public:
    struct Entry
    {
        Address id;
        std::uint32_t depth = 1;
        bool enabled = true;
    };

    void observe(const Reconstruction& r, const ReconstructedStep& step)
    {
        if (last_ == step.raw_index && !frames_.empty())
            return;
        last_ = step.raw_index;
        const Frame& f = r.frame_of(step);
        while (!frames_.empty() && frames_.back().depth >= f.depth)
            frames_.pop_back();
        if (!frames_.empty())
            frames_.back().enabled = false;
        // A caller re-entered from a deeper frame becomes enabled again via the rebuild below.
        if (frames_.size() + 1 != f.depth)
        {
            frames_.clear();
            std::vector<Entry> chain;
            for (int k = step.frame; k >= 0; k = r.frames[static_cast<std::size_t>(k)].parent)
                chain.push_back({r.frames[static_cast<std::size_t>(k)].id, r.frames[static_cast<std::size_t>(k)].depth, false});
            frames_.assign(chain.rbegin(), chain.rend());
            frames_.back().enabled = true;
            return;
        }
        frames_.push_back({f.id, f.depth, true});
    }

    const std::vector<Entry>& frames() const noexcept { return frames_; }

private:
    std::vector<Entry> frames_;
    std::size_t last_ = static_cast<std::size_t>(-1);
};

/// True iff `step` executes in a frame whose id is `target` and that frame has no call in flight.
/// Steps must be fed in trace order.
inline bool gate(ContextTracker& tracker, const Reconstruction& r, const ReconstructedStep& step, const Address& target)
{
    tracker.observe(r, step);
    const auto& top = tracker.frames().back();
    return top.enabled && top.id == target;
}
}  // namespace evmioc
