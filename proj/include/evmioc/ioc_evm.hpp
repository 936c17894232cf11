// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "explorer.hpp"
#include "feed.hpp"
#include "ingest.hpp"
#include "vuln.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace evmioc
{
/// One rule match. EVM-level matches carry a pc; block-level matches do not.
struct Detection
{
    std::string level = "evm";
    std::string rule_id;
    Hash32 tx_hash;
    std::uint64_t block_number = 0;
    std::uint64_t tx_index = 0;
    std::uint64_t pc = 0;
    std::uint32_t frame_depth = 0;
    Address code_address;
    Json detail = Json::object();
    bool tx_failed = false;
    std::string spec;

    std::string tx_status() const { return tx_failed ? "failed" : "success"; }

    Json to_json() const
    {
        return {{"level", level},         {"ruleId", rule_id},         {"txHash", tx_hash.hex()},
                {"blockNumber", block_number}, {"txIndex", tx_index},   {"pc", pc},
                {"frameDepth", frame_depth},   {"codeAddress", code_address.hex()}, {"detail", detail},
                {"txStatus", tx_status()},     {"spec", spec}};
    }
};

/// A transaction the detector could not analyze, with a reason code.
struct SkipRecord
{
    Hash32 tx_hash;
    std::uint64_t block_number = 0;
    std::string reason;  ///< trace-unavailable | tx-not-found | malformed-trace | reconstruction-error
    std::string message;

    Json to_json() const
    {
        return {{"txHash", tx_hash.hex()}, {"blockNumber", block_number}, {"reason", reason}, {"message", message}};
    }
};

// --- the three rule predicates ------------------------------------------------------------------

/// Over/underflow: an integer instruction at a vulnerable pc whose exact result leaves the type bounds.
inline std::optional<Json> detect_overflow(const TraceStep& step, const Address& code_address, const VulnSpec& spec,
                                           const IntTypeBounds& bounds)
{
    const auto op = int_op(step.op);
    if (!op || !spec.contains(code_address, step.pc) || step.stack.size() < arity(*op))
        return std::nullopt;
    std::vector<Word256> operands;
    for (std::size_t i = 0; i < arity(*op); ++i)
        operands.push_back(step.peek(i));
    const ArithResult res = wrap_arith(*op, operands, bounds);
    if (!res.out_of_bounds)
        return std::nullopt;
    Json ops = Json::array();
    for (const auto& w : operands)
        ops.push_back(to_hex_quantity(w));
    Json d = {{"op", std::string(to_string(*op))}, {"operands", ops}, {"zResult", res.z.str()},
              {"result", to_hex_quantity(res.result)}, {"typeMin", bounds.min.str()}, {"typeMax", bounds.max.str()}};
    if (res.clamped)
        d["zClamped"] = true;
    return d;
}

/// DoS with unexpected revert: a CALL at a vulnerable pc whose status pushed to the caller is 0.
inline std::optional<Json> detect_dos_revert(const TraceStep& step, const Address& code_address, const VulnSpec& spec)
{
    if (step.op != OP_CALL || !step.call || !spec.contains(code_address, step.pc))
        return std::nullopt;
    if (!step.call->return_status || *step.call->return_status != 0)
        return std::nullopt;
    return Json{{"callee", step.call->callee.hex()}, {"value", to_hex_quantity(step.call->value)}, {"returnStatus", 0}};
}

/// Reentrancy: an SSTORE at a vulnerable pc while some frame strictly below the executing one has
/// the same id. `frame_ids` runs from the outermost frame to the executing one.
inline std::optional<Json> detect_reentrancy(const TraceStep& step, const Address& code_address,
                                             const std::vector<Address>& frame_ids, const VulnSpec& spec)
{
    if (step.op != OP_SSTORE || frame_ids.empty() || !spec.contains(code_address, step.pc))
        return std::nullopt;
    const Address& id = frame_ids.back();
    std::vector<std::size_t> same;
    for (std::size_t i = 0; i + 1 < frame_ids.size(); ++i)
        if (frame_ids[i] == id)
            same.push_back(i + 1);
    if (same.empty())
        return std::nullopt;
    Json ids = Json::array();
    for (const auto& a : frame_ids)
        ids.push_back(a.hex());
    return Json{{"frameIds", ids}, {"reenteredDepths", same}};
}

// --- rule objects ---------------------------------------------------------------------------

/// A pluggable EVM-level rule. consider() streams the gated steps of one reconstructed
/// transaction through check() and reports every match.
class EvmIoCRule
{
public:
    using Callback = std::function<void(Detection)>;

    virtual ~EvmIoCRule() = default;
    virtual std::string id() const = 0;

    /// Validates the spec for this rule; throws ConfigError.
    virtual void configure(const VulnSpec& spec) { spec_ = spec; }

    const VulnSpec& spec() const noexcept { return spec_; }

    void consider(const Address& target, const Reconstruction& r, const Callback& cb) const
    {
        ContextTracker tracker;
        for (const auto& step : r.steps)
        {
            if (!gate(tracker, r, step, target))
                continue;
            const Frame& f = r.frame_of(step);
            if (!spec_.contains(f.code_address, step->pc))
                continue;
            if (auto detail = check(r, step))
            {
                Detection d;
                d.rule_id = id();
                d.tx_hash = r.tx_hash;
                d.pc = step->pc;
                d.frame_depth = step->depth;
                d.code_address = f.code_address;
                d.detail = std::move(*detail);
                d.tx_failed = r.failed();
                d.spec = spec_.name;
                cb(std::move(d));
            }
        }
    }

protected:
    virtual std::optional<Json> check(const Reconstruction& r, const ReconstructedStep& step) const = 0;

    VulnSpec spec_;
};

class OverflowRule final : public EvmIoCRule
{
public:
    std::string id() const override { return "overflow"; }

    void configure(const VulnSpec& spec) override
    {
        bounds_ = spec.bounds();
        EvmIoCRule::configure(spec);
    }

protected:
    std::optional<Json> check(const Reconstruction& r, const ReconstructedStep& step) const override
    {
        return detect_overflow(*step, r.frame_of(step).code_address, spec_, bounds_);
    }

private:
    IntTypeBounds bounds_;
};

class DosRevertRule final : public EvmIoCRule
{
public:
    std::string id() const override { return "dos"; }

protected:
    std::optional<Json> check(const Reconstruction& r, const ReconstructedStep& step) const override
    {
        return detect_dos_revert(*step, r.frame_of(step).code_address, spec_);
    }
};

class ReentrancyRule final : public EvmIoCRule
{
public:
    std::string id() const override { return "reentrancy"; }

protected:
    std::optional<Json> check(const Reconstruction& r, const ReconstructedStep& step) const override
    {
        if (step->op != OP_SSTORE)
            return std::nullopt;
        return detect_reentrancy(*step, r.frame_of(step).code_address, r.frame_ids(step), spec_);
    }
};

using EvmRuleFactory = std::function<std::unique_ptr<EvmIoCRule>()>;

inline std::map<std::string, EvmRuleFactory>& evm_rule_registry()
{
    static std::map<std::string, EvmRuleFactory> registry = {
        {"overflow", [] { return std::make_unique<OverflowRule>(); }},
        {"dos", [] { return std::make_unique<DosRevertRule>(); }},
        {"reentrancy", [] { return std::make_unique<ReentrancyRule>(); }},
    };
    return registry;
}

/// Instantiates and configures a rule by id; unknown ids and incomplete specs are config errors.
inline std::unique_ptr<EvmIoCRule> make_evm_rule(const std::string& id, const VulnSpec& spec)
{
    const auto& reg = evm_rule_registry();
    const auto it = reg.find(id);
    if (it == reg.end())
        throw ConfigError("unknown EVM-level rule '" + id + "'");
    auto rule = it->second();
    rule->configure(spec);
    return rule;
}

// --- detector driver --------------------------------------------------------------------------

struct EvmRunResult
{
    std::vector<Detection> detections;
    std::vector<SkipRecord> skipped;
    std::size_t analyzed = 0;
    std::uint64_t steps_seen = 0;
};

struct EvmRunOptions
{
    /// Ask the explorer to pre-filter traces down to the vulnerable pcs and call boundaries.
    bool custom_tracer = false;
};

/// The tracer a rule needs: the spec's pcs plus call boundaries.
inline TracerSpec tracer_for(const VulnSpec& spec)
{
    TracerSpec t;
    for (const auto& loc : spec.vuln_locs)
        t.pcs.insert(loc.pcs.begin(), loc.pcs.end());
    t.include_call_boundaries = true;
    return t;
}

/// Replays each external transaction owning a listed TxRef (once per hash) and evaluates the rule.
/// Detections come out ordered by (blockNumber, txIndex, trace position).
inline EvmRunResult run_evm_detector(const std::vector<TxRef>& txs, const EvmIoCRule& rule, Explorer& explorer,
                                     const EvmRunOptions& opt = {})
{
    EvmRunResult out;
    std::set<Hash32> seen;
    std::map<std::uint64_t, std::optional<BlockDetails>> blocks;
    const std::optional<TracerSpec> tracer = opt.custom_tracer ? std::optional<TracerSpec>(tracer_for(rule.spec())) : std::nullopt;
    for (const auto& ref : txs)
    {
        const Hash32& hash = ref.external_hash();
        if (!seen.insert(hash).second)
            continue;
        const auto skip = [&](const char* reason, const std::string& msg) {
            out.skipped.push_back({hash, ref.block_number, reason, msg});
        };
        auto& details = blocks[ref.block_number];
        if (!details)
        {
            try
            {
                details = explorer.collect_block_details(ref.block_number);
            }
            catch (const ArchiveGapError& e)
            {
                skip("trace-unavailable", e.what());
                blocks.erase(ref.block_number);
                continue;
            }
        }
        const Block& block = details->block;
        std::size_t index = block.txs.size();
        for (std::size_t i = 0; i < block.txs.size(); ++i)
            if (block.txs[i].hash == hash)
                index = i;
        if (index == block.txs.size())
        {
            skip("tx-not-found", "transaction not in block " + std::to_string(ref.block_number));
            continue;
        }
        const Transaction& tx = block.txs[index];
        TraceDocument doc;
        try
        {
            doc = parse_struct_logs(explorer.tx_trace(hash, tracer), ParseOptions{tracer.has_value()});
        }
        catch (const ArchiveGapError& e)
        {
            skip("trace-unavailable", e.what());
            continue;
        }
        catch (const ParseError& e)
        {
            skip("malformed-trace", e.what());
            continue;
        }
        catch (const ProtocolError& e)
        {
            skip("malformed-trace", e.what());
            continue;
        }
        try
        {
            const Reconstruction r = reconstruct(doc, tx);
            out.steps_seen += r.steps.size();
            rule.consider(rule.spec().contract, r, [&](Detection d) {
                d.block_number = block.number;
                d.tx_index = index;
                out.detections.push_back(std::move(d));
            });
            ++out.analyzed;
        }
        catch (const ReconstructionError& e)
        {
            skip("reconstruction-error", e.what());
        }
    }
    std::stable_sort(out.detections.begin(), out.detections.end(), [](const Detection& a, const Detection& b) {
        return std::tie(a.block_number, a.tx_index) < std::tie(b.block_number, b.tx_index);
    });
    return out;
}
}  // namespace evmioc
