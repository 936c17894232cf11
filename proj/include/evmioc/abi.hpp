// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "digest.hpp"
#include "word.hpp"

#include <array>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

namespace evmioc
{
/// 4-byte function selector.
struct Selector
{
    std::array<std::uint8_t, 4> bytes{};

    auto operator<=>(const Selector&) const = default;

    std::string hex() const { return to_hex(bytes, true); }

    static Selector from_hex(std::string_view hex)
    {
        const auto raw = bytes_from_hex(hex);
        if (raw.size() != 4)
            throw ParseError("selector must be 4 bytes");
        return Selector{{raw[0], raw[1], raw[2], raw[3]}};
    }

    static std::optional<Selector> of_calldata(ByteView data)
    {
        if (data.size() < 4)
            return std::nullopt;
        return Selector{{data[0], data[1], data[2], data[3]}};
    }

    /// Selector shifted into the top bytes of a word, as seen after CALLDATALOAD(0) & mask.
    Word256 as_word_prefix() const { return word_from_bytes(bytes) << 224; }
};

/// First four bytes of the project digest of a canonical signature such as "withdraw(uint256)".
inline Selector function_selector(std::string_view signature)
{
    const Hash32 h = digest(signature);
    return Selector{{h.bytes[0], h.bytes[1], h.bytes[2], h.bytes[3]}};
}

/// Storage slot of mapping entry `key` for a mapping declared at `slot`: digest(key . slot)
/// over two 32-byte big-endian words.
inline Word256 mapping_slot(const Word256& key, const Word256& slot)
{
    ByteWriter w;
    w.word(key);
    w.word(slot);
    return word_from_bytes(w.finish().bytes);
}

inline Word256 mapping_slot(const Address& key, std::uint64_t slot)
{
    return mapping_slot(key.to_word(), Word256{slot});
}

/// One ABI argument: a static word or a dynamic array of words.
using AbiArg = std::variant<Word256, std::vector<Word256>>;

/// Standard head/tail encoding of `args` after the selector of `signature`.
inline Bytes encode_call(std::string_view signature, const std::vector<AbiArg>& args)
{
    const Selector sel = function_selector(signature);
    Bytes out(sel.bytes.begin(), sel.bytes.end());
    const auto put = [&out](const Word256& w) {
        const auto b = word_to_bytes(w);
        out.insert(out.end(), b.begin(), b.end());
    };
    std::uint64_t tail_offset = 32 * args.size();
    std::vector<Word256> tail;
    for (const auto& arg : args)
    {
        if (const auto* w = std::get_if<Word256>(&arg))
        {
            put(*w);
            continue;
        }
        const auto& arr = std::get<std::vector<Word256>>(arg);
        put(Word256{tail_offset});
        tail.push_back(Word256{arr.size()});
        tail.insert(tail.end(), arr.begin(), arr.end());
        tail_offset += 32 * (1 + arr.size());
    }
    for (const auto& w : tail)
        put(w);
    return out;
}

/// Reads argument word `index` (0-based, after the selector); nullopt when calldata is short.
inline std::optional<Word256> calldata_word(ByteView data, std::size_t index)
{
    const std::size_t at = 4 + 32 * index;
    if (data.size() < at + 32)
        return std::nullopt;
    return word_from_bytes(data.subspan(at, 32));
}

/// Decodes a dynamic word array whose head offset sits at argument `index`.
inline std::optional<std::vector<Word256>> calldata_array(ByteView data, std::size_t index, std::size_t max_len = 4096)
{
    const auto offset = calldata_word(data, index);
    if (!offset || *offset > Word256{data.size()})
        return std::nullopt;
    const std::size_t base = 4 + static_cast<std::size_t>(*offset);
    if (data.size() < base + 32)
        return std::nullopt;
    const Word256 len = word_from_bytes(data.subspan(base, 32));
    if (len > Word256{max_len} || data.size() < base + 32 + 32 * static_cast<std::size_t>(len))
        return std::nullopt;
    std::vector<Word256> out;
    for (std::size_t i = 0; i < static_cast<std::size_t>(len); ++i)
        out.push_back(word_from_bytes(data.subspan(base + 32 + 32 * i, 32)));
    return out;
}
}  // namespace evmioc
