// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "digest.hpp"
#include "word.hpp"

#include <map>
#include <memory>

namespace evmioc
{
using Wei = Word256;

struct Account
{
    std::uint64_t nonce = 0;
    Wei balance = 0;
    /// Zero-valued slots are never stored; absent keys read as zero.
    std::map<Word256, Word256> storage;
    Hash32 code_hash = empty_code_hash();

    bool operator==(const Account&) const = default;
};

/// Read access to a global state. Implemented by in-memory snapshots and by lazy archive views.
class StateView
{
public:
    virtual ~StateView() = default;
    virtual Word256 storage(const Address& account, const Word256& key) const = 0;
    virtual Wei balance(const Address& account) const = 0;
};

/// The global state: address-indexed accounts plus the code store.
class GlobalState final : public StateView
{
public:
    using AccountMap = std::map<Address, Account>;

    bool exists(const Address& a) const { return accounts_.contains(a); }

    const Account* find(const Address& a) const
    {
        const auto it = accounts_.find(a);
        return it == accounts_.end() ? nullptr : &it->second;
    }

    Account& get_or_create(const Address& a) { return accounts_[a]; }

    void erase(const Address& a) { accounts_.erase(a); }

    Word256 storage(const Address& a, const Word256& key) const override
    {
        const auto* acc = find(a);
        if (acc == nullptr)
            return 0;
        const auto it = acc->storage.find(key);
        return it == acc->storage.end() ? Word256{0} : it->second;
    }

    Wei balance(const Address& a) const override
    {
        const auto* acc = find(a);
        return acc == nullptr ? Wei{0} : acc->balance;
    }

    void set_storage(const Address& a, const Word256& key, const Word256& value)
    {
        auto& slots = accounts_[a].storage;
        if (value == 0)
            slots.erase(key);
        else
            slots[key] = value;
    }

    void set_balance(const Address& a, const Wei& value) { accounts_[a].balance = value; }

    /// Installs bytecode for `a` (fixtures deploy code directly, there is no CREATE).
    void set_code(const Address& a, Bytes code)
    {
        const Hash32 h = digest(code);
        accounts_[a].code_hash = h;
        if (!code.empty())
            code_store_.emplace(h, std::make_shared<const Bytes>(std::move(code)));
    }

    void add_code(Bytes code)
    {
        const Hash32 h = digest(code);
        code_store_.emplace(h, std::make_shared<const Bytes>(std::move(code)));
    }

    /// Bytecode of `a`; empty for external accounts and unknown addresses.
    ByteView code(const Address& a) const
    {
        const auto* acc = find(a);
        if (acc == nullptr)
            return {};
        return code_by_hash(acc->code_hash);
    }

    ByteView code_by_hash(const Hash32& h) const
    {
        const auto it = code_store_.find(h);
        if (it == code_store_.end())
            return {};
        return *it->second;
    }

    const AccountMap& accounts() const noexcept { return accounts_; }
    const std::map<Hash32, std::shared_ptr<const Bytes>>& code_store() const noexcept { return code_store_; }

    bool operator==(const GlobalState& other) const { return accounts_ == other.accounts_; }

private:
    AccountMap accounts_;
    std::map<Hash32, std::shared_ptr<const Bytes>> code_store_;
};

inline void write_storage_entries(ByteWriter& w, const std::map<Word256, Word256>& storage)
{
    std::uint64_t live = 0;
    for (const auto& [k, v] : storage)
        live += v != 0 ? 1 : 0;
    w.u64(live);
    for (const auto& [k, v] : storage)
    {
        if (v == 0)
            continue;
        w.word(k);
        w.word(v);
    }
}

/// Canonical serialization hashed by state_root(); layout documented in docs/formats.md.
inline Bytes canonical_state_bytes(const GlobalState& state)
{
    ByteWriter w;
    w.u64(state.accounts().size());
    for (const auto& [address, acc] : state.accounts())  // std::map: ascending address order
    {
        w.address(address);
        w.u64(acc.nonce);
        w.word(acc.balance);
        w.hash(acc.code_hash);
        write_storage_entries(w, acc.storage);
    }
    return w.data();
}

inline Hash32 state_root(const GlobalState& state)
{
    return digest(canonical_state_bytes(state));
}

/// Per-account storage digest, the inline-storage counterpart of a storage trie root.
inline Hash32 storage_hash(const Account& acc)
{
    ByteWriter w;
    write_storage_entries(w, acc.storage);
    return w.finish();
}

/// In-place transfer used by the interpreter. Creates `to` when absent.
inline void transfer_in_place(GlobalState& state, const Address& from, const Address& to, const Wei& value)
{
    const auto* src = state.find(from);
    if (src == nullptr)
        throw TransferError("sender account " + from.hex() + " does not exist");
    if (src->balance < value)
        throw TransferError("insufficient balance in " + from.hex());
    state.get_or_create(to);
    if (from == to || value == 0)
        return;
    state.get_or_create(from).balance -= value;
    state.get_or_create(to).balance += value;
}

inline GlobalState apply_balance_transfer(const GlobalState& state, const Address& from, const Address& to,
                                          const Wei& value)
{
    GlobalState next = state;
    transfer_in_place(next, from, to, value);
    return next;
}
}  // namespace evmioc
