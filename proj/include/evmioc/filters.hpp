// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "explorer.hpp"
#include "feed.hpp"
#include "fixtures.hpp"

#include <map>
#include <optional>
#include <set>
#include <vector>

namespace evmioc
{
struct FilterQuery
{
    Address target;
    std::uint64_t from = 0;
    std::uint64_t to = 0;
    std::set<Selector> selectors;  ///< empty: any function
    bool include_internal = false;

    void validate() const
    {
        if (from > to)
            throw ConfigError("filter block range is empty: from " + std::to_string(from) + " > to " + std::to_string(to));
    }

    Json to_json() const
    {
        Json sels = Json::array();
        for (const auto& s : selectors)
            sels.push_back(s.hex());
        return {{"target", target.hex()}, {"from", from}, {"to", to}, {"selectors", sels}, {"includeInternal", include_internal}};
    }
};

namespace detail
{
inline bool selector_matches(const FilterQuery& q, const std::optional<Selector>& s)
{
    return q.selectors.empty() || (s && q.selectors.contains(*s));
}

/// Keeps the first matching ref per external transaction, ordered by (block, index).
inline std::vector<TxRef> order_and_dedup(std::vector<TxRef> refs)
{
    std::stable_sort(refs.begin(), refs.end(), [](const TxRef& a, const TxRef& b) {
        return std::tie(a.block_number, a.tx_index) < std::tie(b.block_number, b.tx_index);
    });
    std::vector<TxRef> out;
    std::set<Hash32> seen;
    for (auto& r : refs)
        if (seen.insert(r.external_hash()).second)
            out.push_back(std::move(r));
    return out;
}
}  // namespace detail

/// Relevant transactions read from an explorer. Internal calls are discovered from traces.
inline std::vector<TxRef> tx_list(Explorer& explorer, const FilterQuery& q)
{
    q.validate();
    const std::uint64_t height = explorer.block_number();
    if (q.to > height)
        throw RangeError("filter range ends at block " + std::to_string(q.to) + " beyond chain height " +
                         std::to_string(height));
    std::vector<TxRef> refs;
    for (std::uint64_t n = q.from; n <= q.to; ++n)
    {
        const BlockDetails d = explorer.collect_block_details(n);
        for (std::size_t i = 0; i < d.block.txs.size(); ++i)
        {
            const Transaction& tx = d.block.txs[i];
            const auto sel = Selector::of_calldata(tx.data);
            if (tx.to == q.target && detail::selector_matches(q, sel))
            {
                refs.push_back(TxRef{n, i, tx.hash, tx.sender, tx.to, tx.value, sel, false, std::nullopt});
                continue;
            }
            if (!q.include_internal)
                continue;
            const TraceDocument doc = parse_struct_logs(explorer.tx_trace(tx.hash));
            for (auto& ref : internal_tx_refs(tx, n, i, doc))
                if (ref.to == q.target && detail::selector_matches(q, ref.selector))
                {
                    refs.push_back(std::move(ref));
                    break;
                }
        }
    }
    return detail::order_and_dedup(std::move(refs));
}

/// Relevant transactions read from a CSV feed with precomputed internal rows.
inline std::vector<TxRef> tx_list(const std::vector<TxRef>& feed, const FilterQuery& q)
{
    q.validate();
    std::vector<TxRef> refs;
    for (const auto& r : feed)
    {
        if (r.block_number < q.from || r.block_number > q.to || r.to != q.target)
            continue;
        if ((r.internal && !q.include_internal) || !detail::selector_matches(q, r.selector))
            continue;
        refs.push_back(r);
    }
    return detail::order_and_dedup(std::move(refs));
}
}  // namespace evmioc
