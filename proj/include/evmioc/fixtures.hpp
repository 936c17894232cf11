// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chain.hpp"
#include "codec.hpp"
#include "contracts.hpp"
#include "feed.hpp"
#include "ingest.hpp"
#include "vuln.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace evmioc
{
/// Ground truth for one transaction, assigned when the fixture is generated.
struct Label
{
    std::string cls;  ///< overflow | dos | reentrancy | benign
    std::string mechanism;

    bool operator==(const Label&) const = default;
    bool exploit() const { return cls != "benign"; }
};

using LabelStore = std::map<Hash32, Label>;

inline Json labels_to_json(const LabelStore& labels)
{
    Json j = Json::object();
    for (const auto& [h, l] : labels)
        j[h.hex()] = {{"class", l.cls}, {"mechanism", l.mechanism}};
    return j;
}

inline LabelStore labels_from_json(const Json& j)
{
    LabelStore out;
    for (const auto& [h, l] : j.items())
        out[Hash32::from_hex(h)] = Label{codec::str(l, "class"), l.value("mechanism", std::string{})};
    return out;
}

inline const std::vector<std::string>& scenario_names()
{
    static const std::vector<std::string> names = {"Bank", "DelayedUnderflow", "ProductVote", "SimulationBECToken",
                                                   "SimulationKotET", "TargetUnderflow"};
    return names;
}

/// A generated archive node plus everything needed to investigate and score it.
struct Fixture
{
    std::string scenario;
    std::uint64_t seed = 0;
    ArchiveNode node;
    LabelStore labels;
    std::map<Hash32, TraceDocument> traces;
    VulnSpec vuln;
    std::map<std::string, std::string> disassembly;
    std::vector<TxRef> feed;
};

/// Internal transactions of one external transaction: one per call step of its trace.
inline std::vector<TxRef> internal_tx_refs(const Transaction& tx, std::uint64_t block_number, std::uint64_t tx_index,
                                           const TraceDocument& doc)
{
    std::vector<TxRef> out;
    if (doc.steps.empty())
        return out;
    const Reconstruction r = reconstruct(doc, tx);
    for (const auto& s : r.steps)
        if (s->call)
            out.push_back(TxRef{block_number, tx_index, internal_tx_hash(tx.hash, s.raw_index), r.frame_of(s).id,
                                s->call->callee, s->call->value, Selector::of_calldata(s->call->input), true, tx.hash});
    return out;
}

/// External transactions of `node` plus the internal calls visible in their traces.
inline std::vector<TxRef> derive_feed(const ArchiveNode& node, const std::map<Hash32, TraceDocument>& traces)
{
    std::vector<TxRef> feed;
    for (const auto& b : node.chain())
        for (std::size_t i = 0; i < b.txs.size(); ++i)
        {
            const Transaction& tx = b.txs[i];
            feed.push_back(TxRef{b.number, i, tx.hash, tx.sender, tx.to, tx.value, Selector::of_calldata(tx.data), false,
                                 std::nullopt});
            const auto it = traces.find(tx.hash);
            if (it == traces.end())
                continue;
            for (auto& ref : internal_tx_refs(tx, b.number, i, it->second))
                feed.push_back(std::move(ref));
        }
    return feed;
}

namespace detail
{
inline const Wei kEther = Wei{1'000'000'000'000'000'000ull};
inline const Word256 kWordMax = ~Word256{0};

enum class Expect
{
    success,
    failure,
    any,
};

struct PlannedTx
{
    Transaction tx;
    Label label;
    Expect expect = Expect::success;
};

using PlannedBlock = std::vector<PlannedTx>;

class Session
{
public:
    Session(std::string scenario, std::uint64_t seed) : scenario_(std::move(scenario)), seed_(seed)
    {
        ByteWriter w;
        w.bytes(ByteView(reinterpret_cast<const std::uint8_t*>(scenario_.data()), scenario_.size()));
        w.u64(seed);
        const Hash32 h = w.finish();
        std::uint64_t s = 0;
        for (int i = 0; i < 8; ++i)
            s = (s << 8) | h.bytes[static_cast<std::size_t>(i)];
        rng_.seed(s);
    }

    GlobalState genesis;

    Address account(const std::string& role, std::uint64_t i) const
    {
        const Hash32 h = digest(scenario_ + "/" + role + "/" + std::to_string(i));
        Address a;
        std::copy(h.bytes.begin() + 12, h.bytes.end(), a.bytes.begin());
        return a;
    }

    std::uint64_t below(std::uint64_t n) { return rng_() % n; }

    template <class T>
    void shuffle(std::vector<T>& v)
    {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[below(i)]);
    }

    Transaction make(const Address& from, const Address& to, const Wei& value, Bytes data = {})
    {
        return Transaction::make(from, to, value, std::move(data), nonce_++);
    }

    static PlannedTx exploit(Transaction tx, const std::string& cls, const std::string& mech, Expect e = Expect::success)
    {
        return {std::move(tx), {cls, mech}, e};
    }

    static PlannedTx benign(Transaction tx, const std::string& mech, Expect e = Expect::success)
    {
        return {std::move(tx), {"benign", mech}, e};
    }

    /// Adds `only_blocks` noise-only blocks at random positions, one noise tx each, and scatters the
    /// remaining noise across random positions of random blocks.
    void add_noise(std::vector<PlannedBlock>& blocks, std::size_t only_blocks, std::size_t total,
                   const Address& contract, const std::vector<Bytes>& getters)
    {
        std::vector<Address> pool;
        for (std::uint64_t i = 0; i < 10; ++i)
        {
            pool.push_back(account("noise", i));
            genesis.set_balance(pool.back(), 1000 * kEther);
        }
        const auto noise_tx = [&] {
            const Address& from = pool[below(pool.size())];
            if (getters.empty() || below(2) == 0)
            {
                Address to = pool[below(pool.size())];
                while (to == from)
                    to = pool[below(pool.size())];
                return benign(make(from, to, Wei{1 + below(1'000'000'000'000'000ull)}), "noise transfer");
            }
            return benign(make(from, contract, 0, getters[below(getters.size())]), "noise getter call");
        };
        std::size_t made = 0;
        for (std::size_t k = 0; k < only_blocks && made < total; ++k, ++made)
        {
            const std::size_t at = below(blocks.size() + 1);
            blocks.insert(blocks.begin() + static_cast<std::ptrdiff_t>(at), PlannedBlock{noise_tx()});
        }
        for (; made < total; ++made)
        {
            PlannedBlock& b = blocks[below(blocks.size())];
            const std::size_t at = below(b.size() + 1);
            b.insert(b.begin() + static_cast<std::ptrdiff_t>(at), noise_tx());
        }
    }

    Fixture mine(const std::vector<PlannedBlock>& blocks, VulnSpec vuln, std::map<std::string, std::string> disasm)
    {
        ArchiveNode node(genesis);
        LabelStore labels;
        std::map<Hash32, TraceDocument> traces;
        for (const auto& planned : blocks)
        {
            std::vector<Transaction> txs;
            for (const auto& p : planned)
                txs.push_back(p.tx);
            MinedBlock mined = mine_block(node, txs);
            for (std::size_t i = 0; i < planned.size(); ++i)
            {
                ExecutionOutcome& out = mined.outcomes[i];
                const bool ok = out.status == TxStatus::success;
                const Expect e = planned[i].expect;
                if ((e == Expect::success && !ok) || (e == Expect::failure && ok))
                    throw std::logic_error(scenario_ + " block " + std::to_string(mined.block.number) + " tx " +
                                           std::to_string(i) + " (" + planned[i].label.mechanism + ") " +
                                           (ok ? "succeeded" : "failed") + " against the plan");
                labels[planned[i].tx.hash] = planned[i].label;
                traces[planned[i].tx.hash] = TraceDocument{out.summary(), std::move(out.trace)};
            }
        }
        std::vector<TxRef> feed = derive_feed(node, traces);
        return Fixture{scenario_, seed_, std::move(node), std::move(labels), std::move(traces), std::move(vuln),
                       std::move(disasm), std::move(feed)};
    }

    GlobalState& deploy(const Address& a, const ContractImage& img, const Wei& balance)
    {
        genesis.set_code(a, img.code);
        genesis.set_balance(a, balance);
        return genesis;
    }

private:
    std::string scenario_;
    std::uint64_t seed_;
    std::mt19937_64 rng_;
    std::uint64_t nonce_ = 0;
};

inline VulnSpec base_spec(const std::string& name, const Address& contract, const std::string& rule,
                          const ContractImage& img)
{
    VulnSpec v;
    v.name = name;
    v.contract = contract;
    v.evm_rule = rule;
    v.vuln_locs.push_back(VulnLoc{contract, {img.vuln_pcs.begin(), img.vuln_pcs.end()}});
    if (rule == "overflow")
    {
        v.params["typeMin"] = "0";
        v.params["typeMax"] = kWordMax.str();
    }
    return v;
}

inline void set_token_balance(GlobalState& g, const Address& token, const Address& holder, const Word256& v)
{
    g.set_storage(token, mapping_slot(holder, layout::balances), v);
}

inline Bytes call(const char* sig, std::vector<AbiArg> args = {}) { return encode_call(sig, args); }

inline Fixture build_bank_fixture(std::uint64_t seed)
{
    Session s("Bank", seed);
    const Address bank = s.account("contract", 0);
    const ContractImage img = build_bank();
    const ContractImage attacker_img = build_reentrant_attacker(bank, sig::withdraw, std::nullopt);
    s.deploy(bank, img, 50 * kEther);

    std::vector<Address> users, attackers;
    std::vector<Wei> user_dep, att_dep;
    std::vector<PlannedBlock> deposits, payouts;
    for (std::uint64_t i = 0; i < 10; ++i)
    {
        users.push_back(s.account("user", i));
        s.genesis.set_balance(users.back(), 100 * kEther);
        user_dep.push_back((1 + s.below(20)) * kEther);
        deposits.push_back({Session::benign(s.make(users[i], bank, user_dep[i], call(sig::deposit)), "deposit")});
    }
    for (std::uint64_t i = 0; i < 6; ++i)
    {
        attackers.push_back(s.account("attacker", i));
        s.deploy(attackers.back(), attacker_img, 10 * kEther);
        att_dep.push_back((1 + s.below(5)) * kEther);
        deposits.push_back(
            {Session::benign(s.make(attackers[i], bank, att_dep[i], call(sig::deposit)), "attacker deposit")});
    }
    s.shuffle(deposits);
    for (std::size_t i = 0; i < users.size(); ++i)
        payouts.push_back({Session::benign(s.make(users[i], bank, 0, call(sig::withdraw, {user_dep[i]})), "withdrawal")});
    for (std::size_t k = 0; k < 3; ++k)
    {
        PlannedBlock b;
        for (std::size_t j = 2 * k; j < 2 * k + 2; ++j)
            b.push_back(Session::exploit(s.make(attackers[j], bank, 0, call(sig::withdraw, {att_dep[j]})), "reentrancy",
                                         "withdraw re-entered from the payout callback"));
        payouts.push_back(std::move(b));
    }
    s.shuffle(payouts);
    std::vector<PlannedBlock> blocks = std::move(deposits);
    blocks.insert(blocks.end(), payouts.begin(), payouts.end());
    std::vector<Bytes> getters;
    for (std::uint64_t i = 0; i < 4; ++i)
        getters.push_back(call(sig::balance_of, {users[i].to_word()}));
    s.add_noise(blocks, 13, 50, bank, getters);

    VulnSpec v = base_spec("Bank", bank, "reentrancy", img);
    v.block = BlockRuleSpec{"reentrancy", {{"userBalancesSlot", layout::balances}}, function_selector(sig::withdraw), {}};
    return s.mine(blocks, std::move(v), {{"Bank", img.disassembly}, {"ReentrantAttacker", attacker_img.disassembly}});
}

inline Fixture build_product_vote_fixture(std::uint64_t seed)
{
    Session s("ProductVote", seed);
    const Address pv = s.account("contract", 0);
    const ContractImage img = build_product_vote();
    std::vector<Address> attackers, voters;
    Wei credits = 0;
    std::string attacker_disasm;
    for (std::uint64_t j = 0; j < 20; ++j)
    {
        attackers.push_back(s.account("attacker", j));
        const ContractImage a = build_reentrant_attacker(pv, sig::vote, Word256{1 + j % 3});
        if (j == 0)
            attacker_disasm = a.disassembly;
        s.deploy(attackers[j], a, 0);
        const Wei credit = (1 + s.below(3)) * kEther;
        s.genesis.set_storage(pv, mapping_slot(attackers[j], layout::credits), credit);
        credits += credit;
    }
    s.deploy(pv, img, 2 * credits + 20 * kEther);

    std::vector<PlannedBlock> registrations, rounds;
    for (std::uint64_t i = 0; i < 8; ++i)
    {
        voters.push_back(s.account("voter", i));
        s.genesis.set_balance(voters.back(), 100 * kEther);
        registrations.push_back(
            {Session::benign(s.make(voters[i], pv, (1 + s.below(5)) * kEther, call(sig::reg)), "register")});
        rounds.push_back(
            {Session::benign(s.make(voters[i], pv, 0, call(sig::vote, {Word256{1 + s.below(3)}})), "vote")});
    }
    s.shuffle(registrations);
    std::size_t next = 0;
    const auto exploit = [&] {
        return Session::exploit(s.make(attackers[next++], pv, 0, call(sig::vote, {Word256{1 + s.below(3)}})),
                                "reentrancy", "vote re-entered from the credit refund");
    };
    for (int k = 0; k < 5; ++k)
    {
        PlannedBlock b{exploit()};
        b.push_back(exploit());
        rounds.push_back(std::move(b));
    }
    for (int k = 0; k < 10; ++k)
        rounds.push_back({exploit()});
    s.shuffle(rounds);
    std::vector<PlannedBlock> blocks = std::move(registrations);
    blocks.insert(blocks.end(), rounds.begin(), rounds.end());
    s.add_noise(blocks, 7, 79, pv, {call(sig::votes_of, {Word256{1}}), call(sig::votes_of, {Word256{2}}),
                                    call(sig::votes_of, {Word256{3}})});

    VulnSpec v = base_spec("ProductVote", pv, "reentrancy", img);
    v.block = BlockRuleSpec{"reentrancy", {{"userBalancesSlot", layout::credits}}, function_selector(sig::vote), {}};
    return s.mine(blocks, std::move(v), {{"ProductVote", img.disassembly}, {"ReentrantAttacker", attacker_disasm}});
}

inline BlockRuleSpec transfer_overflow_rule()
{
    return BlockRuleSpec{"overflow",
                         {{"balanceOfSlot", layout::balances}},
                         std::nullopt,
                         {ToDecoder{function_selector(sig::transfer), ToDecoder::Kind::arg, 0}}};
}

inline Fixture build_delayed_underflow_fixture(std::uint64_t seed)
{
    Session s("DelayedUnderflow", seed);
    const Address tok = s.account("contract", 0);
    const ContractImage img = build_delayed_underflow();
    s.deploy(tok, img, 0);
    std::vector<PlannedBlock> blocks;
    const std::uint64_t failing = s.below(11);
    for (std::uint64_t j = 0; j < 11; ++j)
    {
        const Address x = s.account("attacker", j);
        const Word256 bal = 1 + s.below(100);
        s.genesis.set_balance(x, kEther);
        set_token_balance(s.genesis, tok, x, bal);
        if (j == failing)
        {
            const Word256 v = kDelayedTransferCap + 1 + s.below(1000);
            blocks.push_back({Session::exploit(s.make(x, tok, 0, call(sig::transfer, {s.account("recipient", j).to_word(), v})),
                                               "overflow", "underflowing transfer above the cap, reverted after the write",
                                               Expect::failure)});
        }
        else
        {
            const Word256 v = bal + 1 + s.below(1000);
            blocks.push_back({Session::exploit(s.make(x, tok, 0, call(sig::transfer, {s.account("recipient", j).to_word(), v})),
                                               "overflow", "transfer above balance wraps the sender balance")});
        }
    }
    for (std::uint64_t i = 0; i < 8; ++i)
    {
        const Address h = s.account("holder", i);
        const Word256 bal = 1000 + s.below(4000);
        s.genesis.set_balance(h, kEther);
        set_token_balance(s.genesis, tok, h, bal);
        const Word256 v = 1 + s.below(static_cast<std::uint64_t>(bal));
        blocks.push_back({Session::benign(s.make(h, tok, 0, call(sig::transfer, {s.account("payee", i).to_word(), v})),
                                          "transfer")});
    }
    s.shuffle(blocks);
    s.add_noise(blocks, 3, 4, tok, {call(sig::balance_of, {s.account("holder", 0).to_word()})});

    VulnSpec v = base_spec("DelayedUnderflow", tok, "overflow", img);
    v.block = transfer_overflow_rule();
    return s.mine(blocks, std::move(v), {{"DelayedUnderflow", img.disassembly}});
}

inline Fixture build_target_underflow_fixture(std::uint64_t seed)
{
    Session s("TargetUnderflow", seed);
    const Address tok = s.account("contract", 0);
    const ContractImage img = build_target_underflow();
    s.deploy(tok, img, 0);
    std::vector<PlannedBlock> blocks;
    for (std::uint64_t j = 0; j < 20; ++j)
    {
        const Address sender = s.account("sender", j);
        const Word256 bal = 1 + s.below(1000);
        s.genesis.set_balance(sender, kEther);
        set_token_balance(s.genesis, tok, sender, bal);
        const Word256 v = bal + 1 + s.below(1000);
        blocks.push_back({Session::exploit(
            s.make(sender, tok, 0, call(sig::transfer, {s.account("recipient", j).to_word(), v})), "overflow",
            "transfer above balance wraps the sender balance")});
    }
    VulnSpec v = base_spec("TargetUnderflow", tok, "overflow", img);
    v.block = transfer_overflow_rule();
    return s.mine(blocks, std::move(v), {{"TargetUnderflow", img.disassembly}});
}

inline Fixture build_bec_fixture(std::uint64_t seed)
{
    Session s("SimulationBECToken", seed);
    const Address tok = s.account("contract", 0);
    const ContractImage img = build_bec_token();
    s.deploy(tok, img, 0);
    const Word256 half = Word256{1} << 255;
    const auto batch = [](const std::vector<Address>& to, const Word256& v) {
        std::vector<Word256> words;
        for (const auto& a : to)
            words.push_back(a.to_word());
        return encode_call(sig::batch_transfer, {words, v});
    };

    std::vector<Address> holders;
    for (std::uint64_t i = 0; i < 10; ++i)
    {
        holders.push_back(s.account("holder", i));
        s.genesis.set_balance(holders[i], kEther);
        set_token_balance(s.genesis, tok, holders[i], 1'000'000 + s.below(1'000'000));
    }
    std::vector<Address> direct, accomplices;
    for (std::uint64_t i = 0; i < 9; ++i)
    {
        direct.push_back(s.account("attacker", i));
        accomplices.push_back(s.account("accomplice", i));
        s.genesis.set_balance(direct[i], kEther);
    }

    std::vector<PlannedBlock> blocks;
    const std::string mech = "batchTransfer count times value wraps to zero";
    for (std::size_t b = 0; b < 4; ++b)
    {
        PlannedBlock blk;
        for (std::size_t i = 2 * b; i < 2 * b + 2; ++i)
            blk.push_back(Session::exploit(s.make(direct[i], tok, 0, batch({direct[i], accomplices[i]}, half)), "overflow", mech));
        blocks.push_back(std::move(blk));
    }
    const Address sink = s.account("sink", 0);
    blocks.push_back({Session::exploit(s.make(direct[8], tok, 0, batch({direct[8], accomplices[8]}, half)), "overflow",
                                       mech + "; proceeds moved out later in the same block"),
                      Session::benign(s.make(direct[8], tok, 0, call(sig::transfer, {sink.to_word(), half})),
                                      "transfer of exploit proceeds")});

    std::string proxy_disasm;
    for (std::uint64_t k = 0; k < 3; ++k)
    {
        const Address eoa = s.account("proxyOwner", k), proxy = s.account("proxy", k);
        const ContractImage p = build_batch_proxy(tok, proxy, s.account("proxyAccomplice", k), half);
        if (k == 0)
            proxy_disasm = p.disassembly;
        s.deploy(proxy, p, 0);
        s.genesis.set_balance(eoa, kEther);
        blocks.push_back({Session::exploit(s.make(eoa, proxy, 0), "overflow", mech + " via an internal call from a proxy")});
    }

    const auto other_holder = [&](std::initializer_list<std::size_t> not_these) {
        for (;;)
        {
            const std::size_t j = s.below(holders.size());
            if (std::find(not_these.begin(), not_these.end(), j) == not_these.end())
                return j;
        }
    };
    for (int t = 0; t < 14; ++t)
    {
        const std::size_t i = s.below(holders.size()), j = other_holder({i});
        blocks.push_back({Session::benign(
            s.make(holders[i], tok, 0, call(sig::transfer, {holders[j].to_word(), Word256{1 + s.below(1000)}})), "transfer")});
    }
    for (int t = 0; t < 3; ++t)
    {
        const std::size_t i = s.below(holders.size()), j = other_holder({i}), k = other_holder({i, j});
        blocks.push_back({Session::benign(s.make(holders[i], tok, 0, batch({holders[j], holders[k]}, 1 + s.below(1000))),
                                          "batchTransfer")});
    }
    s.shuffle(blocks);
    s.add_noise(blocks, 0, 26, tok, {call(sig::balance_of, {holders[0].to_word()})});

    VulnSpec v = base_spec("SimulationBECToken", tok, "overflow", img);
    v.block = BlockRuleSpec{"overflow",
                            {{"balanceOfSlot", layout::balances}},
                            std::nullopt,
                            {ToDecoder{function_selector(sig::transfer), ToDecoder::Kind::arg, 0},
                             ToDecoder{function_selector(sig::batch_transfer), ToDecoder::Kind::array, 0}}};
    return s.mine(blocks, std::move(v), {{"SimulationBECToken", img.disassembly}, {"BatchProxy", proxy_disasm}});
}

inline Fixture build_kotet_fixture(std::uint64_t seed)
{
    Session s("SimulationKotET", seed);
    const Address kotet = s.account("contract", 0);
    const ContractImage img = build_kotet();
    const ContractImage rejecting = build_rejecting_receiver();
    s.deploy(kotet, img, kEther);
    const Address king0 = s.account("king", 0);
    s.genesis.set_balance(king0, kEther);
    s.genesis.set_storage(kotet, layout::king, king0.to_word());
    s.genesis.set_storage(kotet, layout::highest_bid, kEther);
    std::vector<Address> bidders;
    for (std::uint64_t i = 0; i < 10; ++i)
    {
        bidders.push_back(s.account("bidder", i));
        s.genesis.set_balance(bidders[i], 1000 * kEther);
    }
    const Address mallory = s.account("attacker", 0);
    s.deploy(mallory, rejecting, 100 * kEther);

    Wei hb = kEther;
    std::vector<PlannedBlock> blocks;
    std::vector<Wei> pre_hb;
    for (std::size_t r = 0; r < 12; ++r)
    {
        pre_hb.push_back(hb);
        hb += (1 + s.below(5)) * kEther;
        blocks.push_back({Session::benign(s.make(bidders[r % bidders.size()], kotet, hb, call(sig::bid)), "outbid")});
    }
    std::vector<std::size_t> rounds(12);
    std::iota(rounds.begin(), rounds.end(), 0);
    s.shuffle(rounds);
    for (std::size_t k = 0; k < 4; ++k)
    {
        PlannedBlock& b = blocks[rounds[k]];
        const std::size_t at = s.below(b.size() + 1);
        b.insert(b.begin() + static_cast<std::ptrdiff_t>(at),
                 Session::benign(s.make(bidders[s.below(bidders.size())], kotet, pre_hb[rounds[k]], call(sig::bid)),
                                 "bid not above the highest bid", Expect::failure));
    }
    hb += kEther;
    blocks.push_back({Session::benign(s.make(mallory, kotet, hb, call(sig::bid)), "outbid by a contract that rejects refunds")});
    for (int k = 0; k < 4; ++k)
    {
        const Wei bid = hb + (1 + s.below(5)) * kEther;
        blocks.push_back({Session::exploit(s.make(bidders[s.below(bidders.size())], kotet, bid, call(sig::bid)), "dos",
                                           "refund to the current king reverts", Expect::failure)});
    }
    s.add_noise(blocks, 7, 130, kotet, {call(sig::king), call(sig::highest_bid)});

    VulnSpec v = base_spec("SimulationKotET", kotet, "dos", img);
    v.block = BlockRuleSpec{"dos", {{"highestBidSlot", layout::highest_bid}}, std::nullopt, {}};
    return s.mine(blocks, std::move(v), {{"SimulationKotET", img.disassembly}, {"RejectingReceiver", rejecting.disassembly}});
}
}  // namespace detail

/// Generates the labeled chain for one scenario. Deterministic in (scenario, seed).
inline Fixture build_fixture_chain(const std::string& scenario, std::uint64_t seed)
{
    if (scenario == "Bank")
        return detail::build_bank_fixture(seed);
    if (scenario == "ProductVote")
        return detail::build_product_vote_fixture(seed);
    if (scenario == "DelayedUnderflow")
        return detail::build_delayed_underflow_fixture(seed);
    if (scenario == "TargetUnderflow")
        return detail::build_target_underflow_fixture(seed);
    if (scenario == "SimulationBECToken")
        return detail::build_bec_fixture(seed);
    if (scenario == "SimulationKotET")
        return detail::build_kotet_fixture(seed);
    throw UsageError("unknown scenario '" + scenario + "'");
}

struct ScaleLimits
{
    Gas gas_ceiling = kDefaultTxGas;
    std::uint64_t storage_ceiling = 1'000'000;
};

/// Single-exploit fixture grown along one axis: `instructions` pads DelayedUnderflow with
/// PUSH1 0; ADD pairs until the exploit trace has about `magnitude` steps, `storage` pre-populates
/// `magnitude` entries of TargetUnderflow's uint->uint map.
inline Fixture scale_fixture(const std::string& base, const std::string& axis, std::uint64_t magnitude,
                             std::uint64_t seed = 1, const ScaleLimits& limits = {})
{
    using namespace detail;
    if (axis == "instructions" && base != "DelayedUnderflow")
        throw UsageError("the instructions axis grows DelayedUnderflow, not " + base);
    if (axis == "storage" && base != "TargetUnderflow")
        throw UsageError("the storage axis grows TargetUnderflow, not " + base);
    if (axis != "instructions" && axis != "storage")
        throw UsageError("unknown scale axis '" + axis + "'");

    Session s(base, seed);
    const Address tok = s.account("contract", 0), sender = s.account("sender", 0), to = s.account("recipient", 0);
    s.genesis.set_balance(sender, kEther);
    set_token_balance(s.genesis, tok, sender, 5);
    const Transaction tx = s.make(sender, tok, 0, call(sig::transfer, {to.to_word(), Word256{6}}));
    const std::string mech = "transfer above balance wraps the sender balance";

    if (axis == "instructions")
    {
        GlobalState probe = s.genesis;
        probe.set_code(tok, build_delayed_underflow(0).code);
        const std::uint64_t base_len = execute_transaction(probe, tx).trace.size();
        const std::uint64_t pairs = magnitude > base_len ? (magnitude - base_len + 1) / 2 : 0;
        const Gas estimate = 100'000 + static_cast<Gas>(pairs) * 6;
        if (estimate > limits.gas_ceiling)
            throw UsageError("magnitude " + std::to_string(magnitude) + " needs about " + std::to_string(estimate) +
                             " gas, above the ceiling of " + std::to_string(limits.gas_ceiling));
        const ContractImage img = build_delayed_underflow(static_cast<std::size_t>(pairs));
        s.deploy(tok, img, 0);
        VulnSpec v = base_spec(base, tok, "overflow", img);
        v.block = transfer_overflow_rule();
        return s.mine({{Session::exploit(tx, "overflow", mech)}}, std::move(v), {{base, img.disassembly}});
    }

    if (magnitude > limits.storage_ceiling)
        throw UsageError("magnitude " + std::to_string(magnitude) + " exceeds the storage ceiling of " +
                         std::to_string(limits.storage_ceiling));
    const ContractImage img = build_target_underflow();
    s.deploy(tok, img, 0);
    for (std::uint64_t k = 1; k <= magnitude; ++k)
        s.genesis.set_storage(tok, mapping_slot(Word256{k}, Word256{layout::data}), Word256{k});
    VulnSpec v = base_spec(base, tok, "overflow", img);
    v.block = transfer_overflow_rule();
    return s.mine({{Session::exploit(tx, "overflow", mech)}}, std::move(v), {{base, img.disassembly}});
}

/// Re-executes every block from genesis; returns the first block whose recomputed root or hash
/// differs from the archived one.
inline std::optional<std::uint64_t> first_replay_mismatch(const ArchiveNode& node)
{
    ArchiveNode fresh(node.state(node.block(0).state_root));
    for (std::uint64_t n = 1; n <= node.height(); ++n)
    {
        const Block& stored = node.block(n);
        const MinedBlock mined = mine_block(fresh, stored.txs);
        if (mined.block.state_root != stored.state_root || mined.block.hash != stored.hash)
            return n;
    }
    return std::nullopt;
}

// --- on-disk layout ---------------------------------------------------------------------------

namespace detail
{
inline void write_text(const std::filesystem::path& p, const std::string& text)
{
    if (p.has_parent_path())
        std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ConfigError("cannot write " + p.string());
    out << text;
    if (!out)
        throw ConfigError("short write to " + p.string());
}

inline std::string read_text(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw ArchiveGapError("missing archive file " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Json read_json(const std::filesystem::path& p)
{
    try
    {
        return Json::parse(read_text(p));
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw ProtocolError(p.string() + " is not valid JSON: " + e.what());
    }
}
}  // namespace detail

/// Writes chain.json, states/, code/, traces/, labels.json, vulns/, feed.csv and disasm/.
inline void write_fixture(const Fixture& f, const std::filesystem::path& dir)
{
    using detail::write_text;
    Json blocks = Json::array();
    for (const auto& b : f.node.chain())
        blocks.push_back(codec::block_to_json(b));
    write_text(dir / "chain.json", Json{{"scenario", f.scenario}, {"seed", f.seed}, {"blocks", blocks}}.dump(1));
    std::set<Hash32> codes;
    for (const auto& [root, state] : f.node.world())
    {
        write_text(dir / "states" / (root.plain_hex() + ".json"), codec::state_to_json(state).dump());
        for (const auto& [h, code] : state.code_store())
            if (codes.insert(h).second)
                write_text(dir / "code" / (h.plain_hex() + ".hex"), to_hex(*code) + "\n");
    }
    for (const auto& [h, doc] : f.traces)
        write_text(dir / "traces" / (h.plain_hex() + ".json"), serialize_trace(doc));
    write_text(dir / "labels.json", labels_to_json(f.labels).dump(1));
    write_text(dir / "vulns" / (f.scenario + ".json"), f.vuln.to_json().dump(1));
    write_text(dir / "feed.csv", write_csv_feed(f.feed));
    for (const auto& [name, text] : f.disassembly)
        write_text(dir / "disasm" / (name + ".txt"), text);
}

/// Archive node, labels and vulnerability spec read back from a fixture directory.
struct LoadedFixture
{
    std::string scenario;
    std::uint64_t seed = 0;
    ArchiveNode node;
    LabelStore labels;
    VulnSpec vuln;
};

inline std::vector<Block> load_chain(const std::filesystem::path& dir, std::string* scenario = nullptr,
                                     std::uint64_t* seed = nullptr)
{
    const Json chain = detail::read_json(dir / "chain.json");
    std::vector<Block> blocks;
    try
    {
        for (const auto& b : codec::require(chain, "blocks"))
            blocks.push_back(codec::block_from_json(b));
        if (scenario != nullptr)
            *scenario = codec::str(chain, "scenario");
        if (seed != nullptr)
            *seed = chain.value("seed", std::uint64_t{0});
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ProtocolError(std::string("malformed chain.json: ") + e.what());
    }
    return blocks;
}

inline LoadedFixture load_fixture(const std::filesystem::path& dir)
{
    LoadedFixture out{{}, 0, ArchiveNode(GlobalState{}), {}, {}};
    std::vector<Block> blocks = load_chain(dir, &out.scenario, &out.seed);
    std::vector<Bytes> codes;
    if (std::filesystem::exists(dir / "code"))
        for (const auto& e : std::filesystem::directory_iterator(dir / "code"))
        {
            std::string hex = detail::read_text(e.path());
            while (!hex.empty() && (hex.back() == '\n' || hex.back() == '\r'))
                hex.pop_back();
            Bytes code = bytes_from_hex(hex);
            if (digest(code).plain_hex() != e.path().stem().string())
                throw ProtocolError("code file " + e.path().filename().string() + " does not match its digest");
            codes.push_back(std::move(code));
        }
    std::map<Hash32, GlobalState> world;
    for (const auto& b : blocks)
    {
        if (world.contains(b.state_root))
            continue;
        GlobalState s = codec::state_from_json(detail::read_json(dir / "states" / (b.state_root.plain_hex() + ".json")));
        for (const auto& c : codes)
            s.add_code(c);
        world.emplace(b.state_root, std::move(s));
    }
    out.node = ArchiveNode::from_parts(std::move(blocks), std::move(world));
    if (std::filesystem::exists(dir / "labels.json"))
        out.labels = labels_from_json(detail::read_json(dir / "labels.json"));
    out.vuln = VulnSpec::load((dir / "vulns" / (out.scenario + ".json")).string());
    return out;
}
}  // namespace evmioc
