// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

// Independent arbitrary-precision reference for integer instruction semantics, built on GMP.
// Shares nothing with the library's arithmetic beyond the byte layout of a word.

#pragma once

#include <evmioc/arith.hpp>

#include <gmpxx.h>

#include <string>

namespace evmioc::oracle
{
inline mpz_class to_mpz(const Word256& w)
{
    const auto bytes = word_to_bytes(w);
    mpz_class z;
    mpz_import(z.get_mpz_t(), bytes.size(), 1, 1, 1, 0, bytes.data());
    return z;
}

inline mpz_class two_pow(unsigned long e)
{
    mpz_class z;
    mpz_ui_pow_ui(z.get_mpz_t(), 2, e);
    return z;
}

inline mpz_class to_mpz(const BigInt& b)
{
    return mpz_class{b.str()};
}

struct OracleResult
{
    mpz_class result;  // in [0, 2^256)
    mpz_class z;       // exact value (unset when exploded)
    bool out_of_bounds = false;
    bool exploded = false;  // |z| provably beyond 2^256, exact value not computed
};

inline mpz_class reduce(const mpz_class& z)
{
    mpz_class r;
    mpz_fdiv_r(r.get_mpz_t(), z.get_mpz_t(), two_pow(256).get_mpz_t());
    return r;
}

inline OracleResult evaluate(IntOp op, const Word256& wa, const Word256& wb, const Word256& wn, const BigInt& min,
                             const BigInt& max)
{
    const mpz_class lo = to_mpz(min), hi = to_mpz(max);
    const bool signed_cast = lo < 0 || op == IntOp::sdiv;
    const auto cast = [&](const Word256& w) {
        mpz_class z = to_mpz(w);
        if (signed_cast && z >= two_pow(255))
            z -= two_pow(256);
        return z;
    };
    OracleResult r;
    switch (op)
    {
    case IntOp::add:
        r.z = cast(wa) + cast(wb);
        break;
    case IntOp::sub:
        r.z = cast(wa) - cast(wb);
        break;
    case IntOp::mul:
        r.z = cast(wa) * cast(wb);
        break;
    case IntOp::sdiv:
    {
        const mpz_class d = cast(wb);
        if (d == 0)
        {
            r.z = 0;
            r.result = 0;
            return r;
        }
        mpz_tdiv_q(r.z.get_mpz_t(), cast(wa).get_mpz_t(), d.get_mpz_t());
        break;
    }
    case IntOp::addmod:
    case IntOp::mulmod:
    {
        const mpz_class a = to_mpz(wa), b = to_mpz(wb), n = to_mpz(wn);
        r.z = op == IntOp::addmod ? mpz_class{a + b} : mpz_class{a * b};
        if (n == 0)
            r.result = 0;
        else
            mpz_mod(r.result.get_mpz_t(), r.z.get_mpz_t(), n.get_mpz_t());
        return r;
    }
    case IntOp::exp:
    {
        const mpz_class base = cast(wa);
        const mpz_class e = to_mpz(wb);
        mpz_class mag = abs(base);
        if (mag > 1 && e >= 300)
        {
            r.exploded = true;
            r.out_of_bounds = true;
            mpz_powm(r.result.get_mpz_t(), to_mpz(wa).get_mpz_t(), e.get_mpz_t(), two_pow(256).get_mpz_t());
            return r;
        }
        if (mag <= 1 && e > 100000)
        {
            // parity only
            const bool odd = mpz_odd_p(e.get_mpz_t()) != 0;
            r.z = mag == 0 ? mpz_class{0} : ((base < 0 && odd) ? mpz_class{-1} : mpz_class{1});
        }
        else
        {
            mpz_pow_ui(r.z.get_mpz_t(), base.get_mpz_t(), e.get_ui());
            if (mag > 1 && abs(r.z) > two_pow(257))
            {
                r.exploded = true;
                r.out_of_bounds = true;
                r.result = reduce(r.z);
                return r;
            }
        }
        break;
    }
    }
    r.result = reduce(r.z);
    r.out_of_bounds = r.z < lo || r.z > hi;
    return r;
}
}  // namespace evmioc::oracle
