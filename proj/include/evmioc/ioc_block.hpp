// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "explorer.hpp"
#include "feed.hpp"
#include "ioc_evm.hpp"
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
/// A flagged block plus the transactions satisfying the rule's existential.
struct BlockDetection
{
    std::uint64_t block_number = 0;
    std::string rule_id;
    std::vector<Hash32> candidates;
    Json evidence = Json::array();
    std::string spec;

    Json to_json() const
    {
        Json c = Json::array();
        for (const auto& h : candidates)
            c.push_back(h.hex());
        return {{"level", "block"},        {"ruleId", rule_id}, {"blockNumber", block_number},
                {"candidateTxHashes", c}, {"evidence", evidence}, {"spec", spec}};
    }
};

/// Pre- and post-block views of the archived global state.
struct BlockStates
{
    const StateView& before;
    const StateView& after;
};

/// A contract-specific block-level rule. It sees the block's transactions and the two archived
/// states only; nothing is replayed.
class BlockIoCRule
{
public:
    virtual ~BlockIoCRule() = default;
    virtual std::string id() const = 0;

    virtual void configure(const VulnSpec& spec)
    {
        if (!spec.block)
            throw ConfigError("vulnerability spec '" + spec.name + "' has no blockRule section");
        spec_ = spec;
    }

    const VulnSpec& spec() const noexcept { return spec_; }

    std::optional<BlockDetection> consider(std::uint64_t block_number, const std::vector<Transaction>& txs,
                                           const BlockStates& states, const Block* before = nullptr,
                                           const Block* after = nullptr) const
    {
        (void)before;
        (void)after;
        BlockDetection d;
        d.block_number = block_number;
        d.rule_id = id();
        d.spec = spec_.name;
        for (const auto& tx : txs)
        {
            if (tx.to != spec_.contract)
                continue;
            if (spec_.block->selector && Selector::of_calldata(tx.data) != spec_.block->selector)
                continue;
            Json evidence = {{"txHash", tx.hash.hex()}};
            if (check(tx, states, evidence))
                d.candidates.push_back(tx.hash);
            d.evidence.push_back(std::move(evidence));
        }
        if (d.candidates.empty())
            return std::nullopt;
        return d;
    }

protected:
    /// True iff `tx` satisfies the rule; records the values read into `evidence`.
    virtual bool check(const Transaction& tx, const BlockStates& states, Json& evidence) const = 0;

    VulnSpec spec_;
};

/// Flags a token call whose sender's balance rose or whose `_to` balance fell across the block.
class BlockOverflowRule final : public BlockIoCRule
{
public:
    std::string id() const override { return "overflow"; }

    void configure(const VulnSpec& spec) override
    {
        BlockIoCRule::configure(spec);
        slot_ = spec.block->slot("balanceOfSlot");
    }

    /// Decodes the `_to` accounts of a call; nullopt when the calldata does not fit the decoder.
    std::optional<std::vector<Address>> recipients(const Transaction& tx) const
    {
        const auto sel = Selector::of_calldata(tx.data);
        for (const auto& dec : spec_.block->to_decoders)
        {
            if (sel != dec.selector)
                continue;
            std::vector<Address> out;
            if (dec.kind == ToDecoder::Kind::arg)
            {
                const auto w = calldata_word(tx.data, dec.index);
                if (!w)
                    return std::nullopt;
                out.push_back(Address::from_word(*w));
            }
            else
            {
                const auto ws = calldata_array(tx.data, dec.index);
                if (!ws)
                    return std::nullopt;
                for (const auto& w : *ws)
                    out.push_back(Address::from_word(w));
            }
            return out;
        }
        return std::vector<Address>{};
    }

protected:
    bool check(const Transaction& tx, const BlockStates& states, Json& evidence) const override
    {
        const auto balance_of = [&](const StateView& s, const Address& a) {
            return s.storage(spec_.contract, mapping_slot(a.to_word(), slot_));
        };
        const Word256 pre = balance_of(states.before, tx.sender), post = balance_of(states.after, tx.sender);
        evidence["sender"] = {{"address", tx.sender.hex()}, {"before", to_hex_quantity(pre)}, {"after", to_hex_quantity(post)}};
        bool hit = post > pre;
        const auto to = recipients(tx);
        if (!to)
        {
            evidence["note"] = "calldata does not decode; recipient check skipped";
            return hit;
        }
        Json tos = Json::array();
        for (const auto& a : *to)
        {
            const Word256 b = balance_of(states.before, a), p = balance_of(states.after, a);
            tos.push_back({{"address", a.hex()}, {"before", to_hex_quantity(b)}, {"after", to_hex_quantity(p)}});
            hit = hit || p < b;
        }
        evidence["recipients"] = std::move(tos);
        return hit;
    }

private:
    Word256 slot_ = 0;
};

/// Flags a bid above the pre-block highest bid when the highest bid did not change.
class BlockDosRule final : public BlockIoCRule
{
public:
    std::string id() const override { return "dos"; }

    void configure(const VulnSpec& spec) override
    {
        BlockIoCRule::configure(spec);
        slot_ = spec.block->slot("highestBidSlot");
    }

protected:
    bool check(const Transaction& tx, const BlockStates& states, Json& evidence) const override
    {
        const Word256 hb = states.before.storage(spec_.contract, slot_);
        evidence["value"] = to_hex_quantity(tx.value);
        evidence["highestBidBefore"] = to_hex_quantity(hb);
        if (tx.value <= hb)
            return false;
        const Word256 hb_after = states.after.storage(spec_.contract, slot_);
        evidence["highestBidAfter"] = to_hex_quantity(hb_after);
        return hb_after == hb;
    }

private:
    Word256 slot_ = 0;
};

/// Flags a call after which the contract balance differs from its pre-block balance minus the
/// sender's recorded deposit.
class BlockReentrancyRule final : public BlockIoCRule
{
public:
    std::string id() const override { return "reentrancy"; }

    void configure(const VulnSpec& spec) override
    {
        BlockIoCRule::configure(spec);
        slot_ = spec.block->slot("userBalancesSlot");
    }

protected:
    bool check(const Transaction& tx, const BlockStates& states, Json& evidence) const override
    {
        const Wei pre = states.before.balance(spec_.contract), post = states.after.balance(spec_.contract);
        const Word256 user = states.before.storage(spec_.contract, mapping_slot(tx.sender.to_word(), slot_));
        evidence["contractBefore"] = to_hex_quantity(pre);
        evidence["contractAfter"] = to_hex_quantity(post);
        evidence["userBalance"] = to_hex_quantity(user);
        // Exact over Z: a negative expectation never equals a balance.
        return BigInt{post} != BigInt{pre} - BigInt{user};
    }

private:
    Word256 slot_ = 0;
};

using BlockRuleFactory = std::function<std::unique_ptr<BlockIoCRule>()>;

inline std::map<std::string, BlockRuleFactory>& block_rule_registry()
{
    static std::map<std::string, BlockRuleFactory> registry = {
        {"overflow", [] { return std::make_unique<BlockOverflowRule>(); }},
        {"dos", [] { return std::make_unique<BlockDosRule>(); }},
        {"reentrancy", [] { return std::make_unique<BlockReentrancyRule>(); }},
    };
    return registry;
}

inline std::unique_ptr<BlockIoCRule> make_block_rule(const std::string& id, const VulnSpec& spec)
{
    const auto& reg = block_rule_registry();
    const auto it = reg.find(id);
    if (it == reg.end())
        throw ConfigError("unknown block-level rule '" + id + "'");
    auto rule = it->second();
    rule->configure(spec);
    return rule;
}

struct BlockRunResult
{
    std::vector<BlockDetection> detections;
    std::vector<SkipRecord> skipped;
    std::size_t blocks_analyzed = 0;
};

/// Evaluates the rule once per block that holds a listed transaction, over the archived states
/// before (block n-1) and after (block n).
inline BlockRunResult run_block_detector(const std::vector<TxRef>& txs, const BlockIoCRule& rule, Explorer& explorer)
{
    BlockRunResult out;
    std::set<std::uint64_t> numbers;
    for (const auto& r : txs)
        numbers.insert(r.block_number);
    for (const std::uint64_t n : numbers)
    {
        if (n == 0)
            continue;
        try
        {
            const BlockDetails d = explorer.collect_block_details(n);
            const ExplorerStateView before(explorer, n - 1), after(explorer, n);
            if (auto hit = rule.consider(n, d.block.txs, BlockStates{before, after}, d.parent ? &*d.parent : nullptr, &d.block))
                out.detections.push_back(std::move(*hit));
            ++out.blocks_analyzed;
        }
        catch (const ArchiveGapError& e)
        {
            out.skipped.push_back({Hash32{}, n, "state-unavailable", e.what()});
        }
    }
    return out;
}
}  // namespace evmioc
