// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "digest.hpp"
#include "state.hpp"

#include <optional>

namespace evmioc
{
/// An external transaction <sender, to, value, data>. `nonce` only disambiguates otherwise
/// identical transactions in the hash; it is not enforced against account state.
struct Transaction
{
    Hash32 hash;
    Address sender;
    Address to;
    Wei value = 0;
    Bytes data;
    std::uint64_t nonce = 0;
    /// Set on internal transactions exported to filter feeds.
    std::optional<Hash32> parent_tx_hash;

    bool operator==(const Transaction&) const = default;

    /// Digest of the canonical field serialization: sender | to | value | len(data) data | nonce.
    Hash32 compute_hash() const
    {
        ByteWriter w;
        w.address(sender);
        w.address(to);
        w.word(value);
        w.bytes(data);
        w.u64(nonce);
        return w.finish();
    }

    static Transaction make(const Address& sender, const Address& to, const Wei& value, Bytes data,
                            std::uint64_t nonce)
    {
        if (!data.empty() && data.size() < 4)
            throw UsageError("transaction data must be empty or start with a 4-byte selector");
        Transaction t{Hash32{}, sender, to, value, std::move(data), nonce, std::nullopt};
        t.hash = t.compute_hash();
        return t;
    }

    /// First four bytes of calldata, if present.
    std::optional<std::array<std::uint8_t, 4>> selector() const
    {
        if (data.size() < 4)
            return std::nullopt;
        return std::array<std::uint8_t, 4>{data[0], data[1], data[2], data[3]};
    }
};
}  // namespace evmioc
