// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "word.hpp"

#include <openssl/evp.h>

#include <string_view>

namespace evmioc
{
/// The project digest: SHA-256. Used for state roots, transaction/block/code hashes,
/// function selectors, mapping-slot derivation and the SHA3 opcode.
inline Hash32 digest(ByteView data)
{
    Hash32 out;
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.bytes.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32)
        throw Error("digest computation failed");
    return out;
}

inline Hash32 digest(std::string_view text)
{
    return digest(ByteView{reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

/// Incremental big-endian serializer feeding the canonical encodings hashed by this library.
class ByteWriter
{
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }

    void u64(std::uint64_t v)
    {
        for (int i = 7; i >= 0; --i)
            buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void word(const Word256& v)
    {
        const auto b = word_to_bytes(v);
        buf_.insert(buf_.end(), b.begin(), b.end());
    }

    void address(const Address& a) { buf_.insert(buf_.end(), a.bytes.begin(), a.bytes.end()); }
    void hash(const Hash32& h) { buf_.insert(buf_.end(), h.bytes.begin(), h.bytes.end()); }

    void bytes(ByteView data)
    {
        u64(data.size());
        buf_.insert(buf_.end(), data.begin(), data.end());
    }

    const Bytes& data() const noexcept { return buf_; }
    Hash32 finish() const { return digest(buf_); }

private:
    Bytes buf_;
};

/// The empty-code digest assigned to externally owned accounts.
inline const Hash32& empty_code_hash()
{
    static const Hash32 h = digest(ByteView{});
    return h;
}
}  // namespace evmioc
