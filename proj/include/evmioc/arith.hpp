// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "word.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <span>
#include <string_view>

namespace evmioc
{
/// Integer arithmetic instruction class checked by the over/underflow IoC.
enum class IntOp
{
    add,
    mul,
    sub,
    sdiv,
    addmod,
    mulmod,
    exp,
};

constexpr std::string_view to_string(IntOp op) noexcept
{
    switch (op)
    {
    case IntOp::add:
        return "ADD";
    case IntOp::mul:
        return "MUL";
    case IntOp::sub:
        return "SUB";
    case IntOp::sdiv:
        return "SDIV";
    case IntOp::addmod:
        return "ADDMOD";
    case IntOp::mulmod:
        return "MULMOD";
    case IntOp::exp:
        return "EXP";
    }
    return "?";
}

constexpr std::size_t arity(IntOp op) noexcept
{
    return (op == IntOp::addmod || op == IntOp::mulmod) ? 3 : 2;
}

/// Bounds of a source-level integer type. min < 0 selects the signed (two's complement) cast.
struct IntTypeBounds
{
    BigInt min;
    BigInt max;

    static IntTypeBounds unsigned_bits(unsigned width)
    {
        if (width == 0 || width > 256 || width % 8 != 0)
            throw UsageError("unsigned width must be a multiple of 8 in [8, 256]");
        return {BigInt{0}, (BigInt{1} << width) - 1};
    }

    static IntTypeBounds signed_bits(unsigned width)
    {
        if (width == 0 || width > 256 || width % 8 != 0)
            throw UsageError("signed width must be a multiple of 8 in [8, 256]");
        const BigInt half = BigInt{1} << (width - 1);
        return {-half, half - 1};
    }

    static IntTypeBounds make(BigInt min, BigInt max)
    {
        if (min > max)
            throw ConfigError("type bounds require min <= max");
        return {std::move(min), std::move(max)};
    }

    bool is_signed() const { return min < 0; }
    bool contains(const BigInt& z) const { return z >= min && z <= max; }
};

struct ArithResult
{
    Word256 result;
    /// Exact value over Z. For ADDMOD/MULMOD this is the pre-reduction sum/product.
    BigInt z;
    bool out_of_bounds = false;
    /// Set when EXP's exact value was not materialized; `z` then holds +/-2^258,
    /// a stand-in whose only guarantee is lying beyond the bounds on the correct side.
    bool clamped = false;
};

namespace detail
{
using Word512 = boost::multiprecision::uint512_t;

inline void check_arity(IntOp op, std::size_t n)
{
    if (n != arity(op))
        throw UsageError(std::string(to_string(op)) + " expects " + std::to_string(arity(op)) +
                         " operands, got " + std::to_string(n));
}

inline Word256 word_exp(Word256 base, Word256 exponent)
{
    Word256 acc = 1;
    while (exponent != 0)
    {
        if (bit_test(exponent, 0))
            acc *= base;
        base *= base;
        exponent >>= 1;
    }
    return acc;
}

inline Word256 word_sdiv(const Word256& a, const Word256& b)
{
    if (b == 0)
        return 0;
    const bool neg_a = bit_test(a, 255);
    const bool neg_b = bit_test(b, 255);
    const Word256 abs_a = neg_a ? Word256{~a + 1} : a;
    const Word256 abs_b = neg_b ? Word256{~b + 1} : b;
    const Word256 q = abs_a / abs_b;
    return neg_a != neg_b ? Word256{~q + 1} : q;
}
}  // namespace detail

/// Word-domain result of an integer instruction (what the EVM pushes). Stack order: operands[0]
/// is the top of stack (first popped).
inline Word256 wrap_arith_result(IntOp op, std::span<const Word256> operands)
{
    detail::check_arity(op, operands.size());
    const Word256& a = operands[0];
    const Word256& b = operands[1];
    switch (op)
    {
    case IntOp::add:
        return a + b;
    case IntOp::sub:
        return a - b;
    case IntOp::mul:
        return a * b;
    case IntOp::sdiv:
        return detail::word_sdiv(a, b);
    case IntOp::exp:
        return detail::word_exp(a, b);
    case IntOp::addmod:
    case IntOp::mulmod:
    {
        const Word256& n = operands[2];
        if (n == 0)
            return 0;
        const detail::Word512 wa{a}, wb{b}, wn{n};
        const detail::Word512 r = op == IntOp::addmod ? (wa + wb) % wn : (wa * wb) % wn;
        return static_cast<Word256>(r);
    }
    }
    return 0;
}

/// Evaluates an integer instruction both in the word domain and exactly over Z, and reports
/// whether the exact value falls outside `bounds`.
inline ArithResult wrap_arith(IntOp op, std::span<const Word256> operands, const IntTypeBounds& bounds)
{
    detail::check_arity(op, operands.size());
    const bool signed_cast = bounds.is_signed() || op == IntOp::sdiv;
    const auto cast = [&](const Word256& w) { return signed_cast ? to_signed(w) : BigInt{w}; };

    ArithResult r;
    switch (op)
    {
    case IntOp::add:
        r.z = cast(operands[0]) + cast(operands[1]);
        break;
    case IntOp::sub:
        r.z = cast(operands[0]) - cast(operands[1]);
        break;
    case IntOp::mul:
        r.z = cast(operands[0]) * cast(operands[1]);
        break;
    case IntOp::sdiv:
    {
        const BigInt divisor = cast(operands[1]);
        if (divisor == 0)
        {
            r.z = 0;
            r.result = 0;
            r.out_of_bounds = false;
            return r;
        }
        r.z = cast(operands[0]) / divisor;  // truncates toward zero
        break;
    }
    case IntOp::addmod:
    case IntOp::mulmod:
        // Modular by construction: never flagged, z keeps the unreduced value for diagnostics.
        r.z = op == IntOp::addmod ? BigInt{operands[0]} + BigInt{operands[1]}
                                  : BigInt{operands[0]} * BigInt{operands[1]};
        r.result = wrap_arith_result(op, operands);
        r.out_of_bounds = false;
        return r;
    case IntOp::exp:
    {
        const BigInt base = cast(operands[0]);
        const Word256& exponent = operands[1];
        const BigInt magnitude = abs(base);
        if (magnitude > 1)
        {
            const auto lower_bits = msb(magnitude);  // |base| >= 2^lower_bits
            if (exponent > Word256{257} || BigInt{lower_bits} * BigInt{exponent} > 257)
            {
                const bool negative = base < 0 && bit_test(exponent, 0);
                r.z = negative ? BigInt{-(BigInt{1} << 258)} : BigInt{BigInt{1} << 258};
                r.clamped = true;
                r.result = wrap_arith_result(op, operands);
                r.out_of_bounds = true;
                return r;
            }
        }
        r.z = pow(base, static_cast<unsigned>(exponent > Word256{1024} ? Word256{1024} : exponent));
        if (magnitude <= 1 && exponent > Word256{1024})
        {
            // 0^e, 1^e, (-1)^e for large e: only the parity matters.
            if (magnitude == 0)
                r.z = 0;
            else
                r.z = (base < 0 && bit_test(exponent, 0)) ? BigInt{-1} : BigInt{1};
        }
        break;
    }
    }
    r.result = reduce_mod_word(r.z);
    r.out_of_bounds = !bounds.contains(r.z);
    return r;
}

inline std::optional<IntOp> int_op_from_mnemonic(std::string_view name) noexcept
{
    if (name == "ADD")
        return IntOp::add;
    if (name == "MUL")
        return IntOp::mul;
    if (name == "SUB")
        return IntOp::sub;
    if (name == "SDIV")
        return IntOp::sdiv;
    if (name == "ADDMOD")
        return IntOp::addmod;
    if (name == "MULMOD")
        return IntOp::mulmod;
    if (name == "EXP")
        return IntOp::exp;
    return std::nullopt;
}
}  // namespace evmioc
