// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "errors.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evmioc
{
/// 256-bit machine word. Arithmetic wraps modulo 2^256.
using Word256 = boost::multiprecision::uint256_t;

/// Arbitrary-precision signed integer, used wherever a value lives in Z rather than in the word domain.
using BigInt = boost::multiprecision::cpp_int;

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

using Gas = std::int64_t;

namespace detail
{
inline int hex_digit(char c) noexcept
{
    if (c >= '0' && c <= '9')
        return c - '0';
    if (c >= 'a' && c <= 'f')
        return c - 'a' + 10;
    if (c >= 'A' && c <= 'F')
        return c - 'A' + 10;
    return -1;
}

inline std::string_view strip_0x(std::string_view s) noexcept
{
    if (s.size() >= 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X'))
        s.remove_prefix(2);
    return s;
}

constexpr char kHexChars[] = "0123456789abcdef";
}  // namespace detail

inline std::string to_hex(ByteView bytes, bool prefix = false)
{
    std::string out;
    out.reserve(bytes.size() * 2 + 2);
    if (prefix)
        out += "0x";
    for (const auto b : bytes)
    {
        out += detail::kHexChars[b >> 4];
        out += detail::kHexChars[b & 0xf];
    }
    return out;
}

/// Decodes an even-length hex string, with or without a 0x prefix.
inline Bytes bytes_from_hex(std::string_view hex)
{
    hex = detail::strip_0x(hex);
    if (hex.size() % 2 != 0)
        throw ParseError("odd-length hex string");
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        const int hi = detail::hex_digit(hex[2 * i]);
        const int lo = detail::hex_digit(hex[2 * i + 1]);
        if (hi < 0 || lo < 0)
            throw ParseError("invalid hex digit in '" + std::string(hex.substr(0, 16)) + "'");
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

/// Parses a hex quantity ("0x1f", "1f", leading zeros allowed, at most 64 digits).
inline Word256 word_from_hex(std::string_view hex)
{
    hex = detail::strip_0x(hex);
    if (hex.empty())
        throw ParseError("empty hex quantity");
    if (hex.size() > 64)
        throw ParseError("hex quantity wider than 256 bits");
    Word256 v = 0;
    for (const char c : hex)
    {
        const int d = detail::hex_digit(c);
        if (d < 0)
            throw ParseError("invalid hex digit in '" + std::string(hex.substr(0, 16)) + "'");
        v = (v << 4) | static_cast<unsigned>(d);
    }
    return v;
}

/// Minimal hex quantity with 0x prefix: 0 -> "0x0", 255 -> "0xff".
inline std::string to_hex_quantity(const Word256& v)
{
    if (v == 0)
        return "0x0";
    std::string digits;
    Word256 x = v;
    while (x != 0)
    {
        digits += detail::kHexChars[static_cast<unsigned>(x & 0xf)];
        x >>= 4;
    }
    std::reverse(digits.begin(), digits.end());
    return "0x" + digits;
}

inline std::string to_hex_quantity(std::uint64_t v)
{
    return to_hex_quantity(Word256{v});
}

inline std::uint64_t u64_from_hex(std::string_view hex)
{
    const Word256 w = word_from_hex(hex);
    if (w > std::numeric_limits<std::uint64_t>::max())
        throw ParseError("quantity does not fit 64 bits");
    return static_cast<std::uint64_t>(w);
}

inline std::array<std::uint8_t, 32> word_to_bytes(const Word256& v)
{
    std::array<std::uint8_t, 32> out{};
    Word256 x = v;
    for (int i = 31; i >= 0; --i)
    {
        out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(static_cast<unsigned>(x & 0xff));
        x >>= 8;
    }
    return out;
}

/// Big-endian load of up to 32 bytes; shorter input is left-padded.
inline Word256 word_from_bytes(ByteView bytes)
{
    Word256 v = 0;
    for (const auto b : bytes.last(std::min<std::size_t>(bytes.size(), 32)))
        v = (v << 8) | b;
    return v;
}

/// Fixed-width 64-digit hex, no prefix (storage-key convention of structured logs).
inline std::string to_hex_word(const Word256& v)
{
    const auto b = word_to_bytes(v);
    return to_hex(b);
}

/// Two's-complement reading of a word.
inline BigInt to_signed(const Word256& v)
{
    BigInt z{v};
    if (bit_test(v, 255))
        z -= BigInt{1} << 256;
    return z;
}

/// Reduces an integer into the word domain (mod 2^256, non-negative representative).
inline Word256 reduce_mod_word(const BigInt& z)
{
    static const BigInt kModulus = BigInt{1} << 256;
    BigInt r = z % kModulus;
    if (r < 0)
        r += kModulus;
    return static_cast<Word256>(r);
}

/// 160-bit account address.
struct Address
{
    std::array<std::uint8_t, 20> bytes{};

    auto operator<=>(const Address&) const = default;

    static Address from_word(const Word256& w)
    {
        Address a;
        const auto b = word_to_bytes(w);
        std::copy(b.begin() + 12, b.end(), a.bytes.begin());
        return a;
    }

    static Address from_hex(std::string_view hex)
    {
        const auto raw = bytes_from_hex(hex);
        if (raw.size() != 20)
            throw ParseError("address must be 20 bytes");
        Address a;
        std::copy(raw.begin(), raw.end(), a.bytes.begin());
        return a;
    }

    /// Deterministic fixture address whose low 8 bytes carry `n`.
    static Address from_number(std::uint64_t n)
    {
        return from_word(Word256{n});
    }

    Word256 to_word() const { return word_from_bytes(bytes); }
    std::string hex() const { return to_hex(bytes, true); }
    bool is_zero() const { return *this == Address{}; }
};

/// 32-byte digest (state roots, transaction and block hashes, code hashes).
struct Hash32
{
    std::array<std::uint8_t, 32> bytes{};

    auto operator<=>(const Hash32&) const = default;

    static Hash32 from_hex(std::string_view hex)
    {
        const auto raw = bytes_from_hex(hex);
        if (raw.size() != 32)
            throw ParseError("hash must be 32 bytes");
        Hash32 h;
        std::copy(raw.begin(), raw.end(), h.bytes.begin());
        return h;
    }

    std::string hex() const { return to_hex(bytes, true); }
    /// Unprefixed form, used in fixture file names.
    std::string plain_hex() const { return to_hex(bytes); }
    bool is_zero() const { return *this == Hash32{}; }
};

inline Word256 parse_decimal_or_hex(std::string_view s)
{
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X'))
        return word_from_hex(s);
    if (s.empty())
        throw ParseError("empty number");
    Word256 v = 0;
    for (const char c : s)
    {
        if (c < '0' || c > '9')
            throw ParseError("invalid decimal number '" + std::string(s) + "'");
        v = v * 10 + static_cast<unsigned>(c - '0');
    }
    return v;
}

inline BigInt parse_bigint(std::string_view s)
{
    if (s.empty())
        throw ParseError("empty integer");
    const bool neg = s.front() == '-';
    if (neg)
        s.remove_prefix(1);
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
        throw ParseError("invalid integer");
    BigInt v{std::string(s)};
    return neg ? BigInt{-v} : v;
}
}  // namespace evmioc
