// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "abi.hpp"
#include "assembler.hpp"

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

// Hand-assembled fixture contracts. Stack comments list items bottom..top.

namespace evmioc
{
struct ContractImage
{
    Bytes code;
    std::vector<std::uint64_t> vuln_pcs;
    std::map<std::string, std::string> signatures;  ///< selector hex -> canonical signature
    std::string disassembly;
};

namespace sig
{
inline constexpr const char* deposit = "deposit()";
inline constexpr const char* withdraw = "withdraw(uint256)";
inline constexpr const char* balance_of = "balanceOf(address)";
inline constexpr const char* reg = "register()";
inline constexpr const char* vote = "vote(uint256)";
inline constexpr const char* votes_of = "votesOf(uint256)";
inline constexpr const char* transfer = "transfer(address,uint256)";
inline constexpr const char* batch_transfer = "batchTransfer(address[],uint256)";
inline constexpr const char* store = "store(uint256,uint256)";
inline constexpr const char* bid = "bid()";
inline constexpr const char* king = "king()";
inline constexpr const char* highest_bid = "highestBid()";
}  // namespace sig

/// Storage layout of the fixture contracts (mapping slots derive via mapping_slot()).
namespace layout
{
inline constexpr std::uint64_t balances = 0;  ///< Bank, token contracts: address -> uint
inline constexpr std::uint64_t credits = 0;   ///< ProductVote: address -> credit in Wei
inline constexpr std::uint64_t voted = 1;     ///< ProductVote: address -> bool
inline constexpr std::uint64_t votes = 2;     ///< ProductVote: product -> count
inline constexpr std::uint64_t data = 2;      ///< TargetUnderflow: uint -> uint
inline constexpr std::uint64_t king = 0;      ///< KotET
inline constexpr std::uint64_t highest_bid = 1;
}  // namespace layout

/// Cap enforced after the writes in DelayedUnderflow.transfer.
inline const Word256 kDelayedTransferCap = Word256{1} << 128;

namespace macro
{
inline const Word256 kSelectorMask = Word256{0xffffffffu} << 224;

/// [] -> [selector-word]
inline void load_selector(Assembler& a)
{
    a.push(0).op(OP_CALLDATALOAD).push(kSelectorMask).op(OP_AND);
}

/// [sel] -> [sel]; jumps to `label` when sel matches `signature`.
inline void dispatch(Assembler& a, const char* signature, const std::string& label)
{
    a.op(OP_DUP1).push(function_selector(signature).as_word_prefix()).op(OP_EQ).jumpi(label);
}

/// [key] -> [slot of mapping[key]]
inline void mapping_slot(Assembler& a, std::uint64_t slot)
{
    a.push(0).op(OP_MSTORE).push(slot).push(32).op(OP_MSTORE).push(64).push(0).op(OP_SHA3);
}

/// [] -> [calldata argument i]
inline void arg(Assembler& a, std::size_t i)
{
    a.push(4 + 32 * i).op(OP_CALLDATALOAD);
}

/// [v] -> RETURN v as one word
inline void return_word(Assembler& a)
{
    a.push(0).op(OP_MSTORE).push(32).push(0).op(OP_RETURN);
}

inline void revert_label(Assembler& a, const std::string& label = "fail")
{
    a.label(label).push(0).push(0).op(OP_REVERT);
}

/// mapping getter: [] -> RETURN mapping[arg0]
inline void mapping_getter(Assembler& a, std::uint64_t slot)
{
    arg(a, 0);
    mapping_slot(a, slot);
    a.op(OP_SLOAD);
    return_word(a);
}
}  // namespace macro

inline ContractImage finish_image(const Assembler& a, std::initializer_list<const char*> sigs,
                                  const std::string& vuln_mark = "vuln")
{
    ContractImage img;
    img.code = a.assemble();
    if (const auto it = a.marks().find(vuln_mark); it != a.marks().end())
        img.vuln_pcs = it->second;
    std::map<std::uint64_t, std::string> notes;
    for (const auto pc : img.vuln_pcs)
        notes[pc] = "VULN_LOC";
    img.disassembly = disassemble(img.code, notes);
    for (const char* s : sigs)
        img.signatures[function_selector(s).hex()] = s;
    return img;
}

/// Bank: deposit(), withdraw(uint256) paying out before the balance write, balanceOf(address).
inline ContractImage build_bank()
{
    using namespace macro;
    Assembler a;
    load_selector(a);
    dispatch(a, sig::deposit, "deposit");
    dispatch(a, sig::withdraw, "withdraw");
    dispatch(a, sig::balance_of, "balanceOf");
    a.jump("fail");

    a.label("deposit").op(OP_POP);
    a.op(OP_CALLER);
    mapping_slot(a, layout::balances);                  // [slot]
    a.op(OP_DUP1).op(OP_SLOAD).op(OP_CALLVALUE).op(OP_ADD);  // [slot, bal+v]
    a.op(OP_SWAP1).op(OP_SSTORE).op(OP_STOP);

    a.label("withdraw").op(OP_POP);
    arg(a, 0);  // [amt]
    a.op(OP_CALLER);
    mapping_slot(a, layout::balances);             // [amt, slot]
    a.op(OP_DUP1).op(OP_SLOAD);                    // [amt, slot, bal]
    a.op(OP_DUP1).op(OP_DUP4).op(OP_GT).jumpi("fail");  // amt > bal
    a.push(0).push(0).push(0).push(0).op(OP_DUP7).op(OP_CALLER).op(OP_GAS).op(OP_CALL);
    a.op(OP_ISZERO).jumpi("fail");                 // [amt, slot, bal]
    a.op(OP_DUP3).op(OP_SWAP1).op(OP_SUB);         // [amt, slot, bal-amt]
    a.op(OP_SWAP1).mark("vuln").op(OP_SSTORE).op(OP_STOP);

    a.label("balanceOf").op(OP_POP);
    mapping_getter(a, layout::balances);
    revert_label(a);
    return finish_image(a, {sig::deposit, sig::withdraw, sig::balance_of});
}

/// ProductVote: register() payable, vote(uint256) refunding credits before clearing them, votesOf(uint256).
inline ContractImage build_product_vote()
{
    using namespace macro;
    Assembler a;
    load_selector(a);
    dispatch(a, sig::reg, "register");
    dispatch(a, sig::vote, "vote");
    dispatch(a, sig::votes_of, "votesOf");
    a.jump("fail");

    a.label("register").op(OP_POP);
    a.op(OP_CALLER);
    mapping_slot(a, layout::credits);
    a.op(OP_CALLVALUE).op(OP_SWAP1).op(OP_SSTORE).op(OP_STOP);

    a.label("vote").op(OP_POP);
    a.op(OP_CALLER);
    mapping_slot(a, layout::voted);
    a.op(OP_SLOAD).jumpi("fail");  // already voted
    a.op(OP_CALLER);
    mapping_slot(a, layout::credits);
    a.op(OP_DUP1).op(OP_SLOAD);                     // [cslot, credit]
    a.op(OP_DUP1).op(OP_ISZERO).jumpi("fail");
    arg(a, 0);
    mapping_slot(a, layout::votes);                 // [cslot, credit, vslot]
    a.op(OP_DUP1).op(OP_SLOAD).push(1).op(OP_ADD).op(OP_SWAP1).op(OP_SSTORE);
    a.push(0).push(0).push(0).push(0).op(OP_DUP5).op(OP_CALLER).op(OP_GAS).op(OP_CALL);  // refund
    a.op(OP_ISZERO).jumpi("fail");                  // [cslot, credit]
    a.op(OP_POP).push(0).op(OP_SWAP1);              // [0, cslot]
    a.mark("vuln").op(OP_SSTORE);
    a.push(1).op(OP_CALLER);
    mapping_slot(a, layout::voted);
    a.op(OP_SSTORE).op(OP_STOP);

    a.label("votesOf").op(OP_POP);
    mapping_getter(a, layout::votes);
    revert_label(a);
    return finish_image(a, {sig::reg, sig::vote, sig::votes_of});
}

/// Emits the shared token transfer body: debit caller by arg1 (the SUB is marked `sub_mark`
/// when non-empty), credit arg0. Optionally checks the balance first. Leaves [v].
inline void token_transfer_body(Assembler& a, bool checked, const std::string& sub_mark)
{
    using namespace macro;
    arg(a, 1);  // [v]
    a.op(OP_CALLER);
    mapping_slot(a, layout::balances);  // [v, sslot]
    a.op(OP_DUP1).op(OP_SLOAD);         // [v, sslot, bal]
    if (checked)
        a.op(OP_DUP1).op(OP_DUP4).op(OP_GT).jumpi("fail");
    a.op(OP_DUP3).op(OP_SWAP1);  // [v, sslot, v, bal]
    if (!sub_mark.empty())
        a.mark(sub_mark);
    a.op(OP_SUB);                        // [v, sslot, bal-v]
    a.op(OP_SWAP1).op(OP_SSTORE);        // [v]
    arg(a, 0);
    mapping_slot(a, layout::balances);   // [v, tslot]
    a.op(OP_DUP1).op(OP_SLOAD).op(OP_DUP3).op(OP_ADD).op(OP_SWAP1).op(OP_SSTORE);  // [v]
}

/// DelayedUnderflow: transfer(address,uint256) writes the unchecked difference, then enforces a
/// transfer cap. `nop_pairs` PUSH1 0; ADD pairs are inserted before the cap check.
inline ContractImage build_delayed_underflow(std::size_t nop_pairs = 0)
{
    using namespace macro;
    Assembler a(nop_pairs * 3 > 60000 ? 3 : 2);
    load_selector(a);
    dispatch(a, sig::transfer, "transfer");
    dispatch(a, sig::balance_of, "balanceOf");
    a.jump("fail");

    a.label("transfer").op(OP_POP);
    token_transfer_body(a, false, "vuln");  // [v]
    for (std::size_t i = 0; i < nop_pairs; ++i)
        a.push(0).op(OP_ADD);
    a.push(kDelayedTransferCap).op(OP_LT).jumpi("fail");  // cap < v
    a.op(OP_STOP);

    a.label("balanceOf").op(OP_POP);
    mapping_getter(a, layout::balances);
    revert_label(a);
    return finish_image(a, {sig::transfer, sig::balance_of});
}

/// TargetUnderflow: unchecked transfer(address,uint256) plus a uint->uint map written by store().
inline ContractImage build_target_underflow()
{
    using namespace macro;
    Assembler a;
    load_selector(a);
    dispatch(a, sig::transfer, "transfer");
    dispatch(a, sig::store, "store");
    dispatch(a, sig::balance_of, "balanceOf");
    a.jump("fail");

    a.label("transfer").op(OP_POP);
    token_transfer_body(a, false, "vuln");
    a.op(OP_STOP);

    a.label("store").op(OP_POP);
    arg(a, 1);
    arg(a, 0);
    mapping_slot(a, layout::data);
    a.op(OP_SSTORE).op(OP_STOP);

    a.label("balanceOf").op(OP_POP);
    mapping_getter(a, layout::balances);
    revert_label(a);
    return finish_image(a, {sig::transfer, sig::store, sig::balance_of});
}

/// SimulationBECToken: checked transfer and batchTransfer(address[],uint256) whose
/// cnt * value product is unchecked.
inline ContractImage build_bec_token()
{
    using namespace macro;
    Assembler a;
    load_selector(a);
    dispatch(a, sig::transfer, "transfer");
    dispatch(a, sig::batch_transfer, "batch");
    dispatch(a, sig::balance_of, "balanceOf");
    a.jump("fail");

    a.label("transfer").op(OP_POP);
    token_transfer_body(a, true, "");
    a.op(OP_STOP);

    a.label("batch").op(OP_POP);
    arg(a, 1);                                       // [value]
    arg(a, 0);
    a.push(4).op(OP_ADD);                            // [value, lenOff]
    a.op(OP_DUP1).op(OP_CALLDATALOAD);               // [value, lenOff, cnt]
    a.op(OP_DUP3).op(OP_DUP2);                       // [value, lenOff, cnt, value, cnt]
    a.mark("vuln").op(OP_MUL);                       // [value, lenOff, cnt, amount]
    a.op(OP_DUP2).op(OP_ISZERO).jumpi("fail");       // cnt == 0
    a.push(20).op(OP_DUP3).op(OP_GT).jumpi("fail");  // cnt > 20
    a.op(OP_DUP4).op(OP_ISZERO).jumpi("fail");       // value == 0
    a.op(OP_CALLER);
    mapping_slot(a, layout::balances);               // [value, lenOff, cnt, amount, sslot]
    a.op(OP_DUP1).op(OP_SLOAD);                      // [.., amount, sslot, bal]
    a.op(OP_DUP1).op(OP_DUP4).op(OP_GT).jumpi("fail");  // amount > bal
    a.op(OP_DUP3).op(OP_SWAP1).op(OP_SUB).op(OP_SWAP1).op(OP_SSTORE);  // [value, lenOff, cnt, amount]
    a.op(OP_POP).push(0);                            // [value, lenOff, cnt, i]
    a.label("loop");
    a.op(OP_DUP2).op(OP_DUP2).op(OP_LT).op(OP_ISZERO).jumpi("done");  // !(i < cnt)
    a.op(OP_DUP1).push(32).op(OP_MUL).op(OP_DUP4).op(OP_ADD).push(32).op(OP_ADD).op(OP_CALLDATALOAD);
    mapping_slot(a, layout::balances);               // [value, lenOff, cnt, i, rslot]
    a.op(OP_DUP1).op(OP_SLOAD).op(OP_DUP6).op(OP_ADD).op(OP_SWAP1).op(OP_SSTORE);
    a.push(1).op(OP_ADD).jump("loop");
    a.label("done").op(OP_STOP);

    a.label("balanceOf").op(OP_POP);
    mapping_getter(a, layout::balances);
    revert_label(a);
    return finish_image(a, {sig::transfer, sig::batch_transfer, sig::balance_of});
}

/// SimulationKotET: bid() refunds the previous king with an unchecked-outcome CALL, then
/// requires its success.
inline ContractImage build_kotet()
{
    using namespace macro;
    Assembler a;
    load_selector(a);
    dispatch(a, sig::bid, "bid");
    dispatch(a, sig::king, "king");
    dispatch(a, sig::highest_bid, "highestBid");
    a.jump("fail");

    a.label("bid").op(OP_POP);
    a.push(layout::highest_bid).op(OP_SLOAD);                                  // [hb]
    a.op(OP_DUP1).op(OP_CALLVALUE).op(OP_GT).op(OP_ISZERO).jumpi("fail");      // callvalue > hb
    a.push(0).push(0).push(0).push(0).op(OP_DUP5).push(layout::king).op(OP_SLOAD).op(OP_GAS);
    a.mark("vuln").op(OP_CALL);                                                // [hb, ok]
    a.op(OP_ISZERO).jumpi("fail");
    a.op(OP_POP).op(OP_CALLER).push(layout::king).op(OP_SSTORE);
    a.op(OP_CALLVALUE).push(layout::highest_bid).op(OP_SSTORE).op(OP_STOP);

    a.label("king").op(OP_POP).push(layout::king).op(OP_SLOAD);
    return_word(a);
    a.label("highestBid").op(OP_POP).push(layout::highest_bid).op(OP_SLOAD);
    return_word(a);
    revert_label(a);
    return finish_image(a, {sig::bid, sig::king, sig::highest_bid});
}

/// Writes `words` as calldata at memory 0x80.., returns its byte length.
inline std::size_t emit_calldata(Assembler& a, const Selector& sel, const std::vector<std::variant<Word256, Address>>& words)
{
    a.push(sel.as_word_prefix()).push(0x80).op(OP_MSTORE);
    std::uint64_t at = 0x84;
    for (const auto& w : words)
    {
        if (const auto* addr = std::get_if<Address>(&w))
            a.push_address(*addr);
        else
            a.push(std::get<Word256>(w));
        a.push(at).op(OP_MSTORE);
        at += 32;
    }
    return 4 + 32 * words.size();
}

/// Fallback of a reentrancy attacker: on the first payout re-enters `target` once with
/// selector(arg), arg being the received value when `fixed_arg` is empty.
inline ContractImage build_reentrant_attacker(const Address& target, const char* signature,
                                              std::optional<Word256> fixed_arg)
{
    using namespace macro;
    Assembler a;
    a.push(0).op(OP_SLOAD).jumpi("done");  // re-entry guard
    a.push(1).push(0).op(OP_SSTORE);
    a.push(function_selector(signature).as_word_prefix()).push(0x80).op(OP_MSTORE);
    if (fixed_arg)
        a.push(*fixed_arg);
    else
        a.op(OP_CALLVALUE);
    a.push(0x84).op(OP_MSTORE);
    a.push(0).push(0).push(36).push(0x80).push(0).push_address(target).op(OP_GAS).op(OP_CALL);
    a.op(OP_POP);
    a.push(0).push(0).op(OP_SSTORE);
    a.label("done").op(OP_STOP);
    return finish_image(a, {});
}

/// Attacker proxy: any call makes it invoke target.batchTransfer([self, accomplice], value).
inline ContractImage build_batch_proxy(const Address& token, const Address& self, const Address& accomplice,
                                       const Word256& value)
{
    Assembler a;
    const std::size_t len = emit_calldata(a, function_selector(sig::batch_transfer),
                                          {Word256{0x40}, value, Word256{2}, self, accomplice});
    a.push(0).push(0).push(len).push(0x80).push(0).push_address(token).op(OP_GAS).op(OP_CALL);
    a.op(OP_POP).op(OP_STOP);
    return finish_image(a, {});
}

/// Account whose code rejects every call (including plain payments).
inline ContractImage build_rejecting_receiver()
{
    Assembler a;
    macro::revert_label(a, "reject");
    return finish_image(a, {});
}
}  // namespace evmioc
