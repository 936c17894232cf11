// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "errors.hpp"
#include "interpreter.hpp"
#include "state.hpp"
#include "transaction.hpp"

#include <map>
#include <vector>

namespace evmioc
{
struct Receipt
{
    Hash32 tx_hash;
    bool success = true;
    Gas gas_used = 0;
    std::vector<LogEntry> logs;

    bool operator==(const Receipt&) const = default;
};

inline Receipt generate_receipt(const Transaction& tx, const ExecutionOutcome& out)
{
    return Receipt{tx.hash, out.status == TxStatus::success, out.gas_used, out.logs};
}

struct Block
{
    std::uint64_t number = 0;
    Hash32 hash;
    Hash32 parent;  ///< zero for genesis
    std::vector<Transaction> txs;
    std::vector<Receipt> receipts;
    Hash32 state_root;

    bool operator==(const Block&) const = default;
};

/// digest(number | parent | stateRoot | u64 n | txHash_i.. | status_i..)
inline Hash32 block_hash(const Block& b)
{
    ByteWriter w;
    w.u64(b.number);
    w.hash(b.parent);
    w.hash(b.state_root);
    w.u64(b.txs.size());
    for (const auto& tx : b.txs)
        w.hash(tx.hash);
    for (const auto& r : b.receipts)
        w.u8(r.success ? 1 : 0);
    return w.finish();
}

/// Blockchain BC plus world state omega (state root -> snapshot).
class ArchiveNode
{
public:
    explicit ArchiveNode(GlobalState genesis)
    {
        Block b;
        b.state_root = state_root(genesis);
        b.hash = block_hash(b);
        world_.emplace(b.state_root, std::move(genesis));
        chain_.push_back(std::move(b));
    }

    /// Rebuilds a node from stored blocks and snapshots (e.g. a fixture directory).
    static ArchiveNode from_parts(std::vector<Block> chain, std::map<Hash32, GlobalState> world)
    {
        if (chain.empty())
            throw ProtocolError("archive has no genesis block");
        ArchiveNode node;
        node.chain_ = std::move(chain);
        node.world_ = std::move(world);
        return node;
    }

    const std::vector<Block>& chain() const noexcept { return chain_; }
    const std::map<Hash32, GlobalState>& world() const noexcept { return world_; }
    const Block& head() const { return chain_.back(); }
    std::uint64_t height() const { return chain_.back().number; }

    const Block& block(std::uint64_t number) const
    {
        if (number >= chain_.size())
            throw RangeError("block " + std::to_string(number) + " beyond chain height " +
                             std::to_string(height()));
        return chain_[number];
    }

    const GlobalState& state(const Hash32& root) const
    {
        const auto it = world_.find(root);
        if (it == world_.end())
            throw ArchiveGapError("no archived state for root " + root.hex());
        return it->second;
    }

    void append(Block b, GlobalState post)
    {
        world_.emplace(b.state_root, std::move(post));
        chain_.push_back(std::move(b));
    }

private:
    ArchiveNode() = default;

    std::vector<Block> chain_;
    std::map<Hash32, GlobalState> world_;
};

struct MinedBlock
{
    Block block;
    std::vector<ExecutionOutcome> outcomes;
};

/// Big step: executes `selection` in order on top of the head state and appends the block.
/// Failed transactions are included with failure receipts and leave the state untouched.
inline MinedBlock mine_block(ArchiveNode& node, const std::vector<Transaction>& selection,
                             Gas gas_limit = kDefaultTxGas)
{
    const Block& parent = node.head();
    GlobalState sigma = node.state(parent.state_root);
    MinedBlock mined;
    Block& b = mined.block;
    b.number = parent.number + 1;
    b.parent = parent.hash;
    for (const auto& tx : selection)
    {
        ExecutionOutcome out = execute_transaction(sigma, tx, gas_limit);
        sigma = std::move(out.final_state);
        out.final_state = GlobalState{};
        b.txs.push_back(tx);
        b.receipts.push_back(generate_receipt(tx, out));
        mined.outcomes.push_back(std::move(out));
    }
    b.state_root = state_root(sigma);
    b.hash = block_hash(b);
    node.append(b, std::move(sigma));
    return mined;
}

/// Big-step lookup: the pre/post snapshots of block `number`, retrieved rather than computed.
inline std::pair<const GlobalState&, const GlobalState&> big_step_lookup(const ArchiveNode& node,
                                                                          std::uint64_t number)
{
    const Block& b = node.block(number);
    if (number == 0)
        throw RangeError("genesis has no parent state");
    const Block& parent = node.block(number - 1);
    return {node.state(parent.state_root), node.state(b.state_root)};
}
}  // namespace evmioc
