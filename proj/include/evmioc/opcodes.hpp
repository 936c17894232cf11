// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "arith.hpp"
#include "word.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace evmioc
{
/// The interpreter's opcode subset, numbered as in the EVM.
enum Op : std::uint8_t
{
    OP_STOP = 0x00,
    OP_ADD = 0x01,
    OP_MUL = 0x02,
    OP_SUB = 0x03,
    OP_SDIV = 0x05,
    OP_ADDMOD = 0x08,
    OP_MULMOD = 0x09,
    OP_EXP = 0x0a,
    OP_LT = 0x10,
    OP_GT = 0x11,
    OP_EQ = 0x14,
    OP_ISZERO = 0x15,
    OP_AND = 0x16,
    OP_OR = 0x17,
    OP_NOT = 0x19,
    OP_SHA3 = 0x20,
    OP_BALANCE = 0x31,
    OP_CALLER = 0x33,
    OP_CALLVALUE = 0x34,
    OP_CALLDATALOAD = 0x35,
    OP_CALLDATASIZE = 0x36,
    OP_SELFBALANCE = 0x47,
    OP_POP = 0x50,
    OP_MLOAD = 0x51,
    OP_MSTORE = 0x52,
    OP_SLOAD = 0x54,
    OP_SSTORE = 0x55,
    OP_JUMP = 0x56,
    OP_JUMPI = 0x57,
    OP_PC = 0x58,
    OP_GAS = 0x5a,
    OP_JUMPDEST = 0x5b,
    OP_PUSH1 = 0x60,
    OP_PUSH32 = 0x7f,
    OP_DUP1 = 0x80,
    OP_DUP2 = 0x81,
    OP_DUP3 = 0x82,
    OP_DUP4 = 0x83,
    OP_DUP5 = 0x84,
    OP_DUP6 = 0x85,
    OP_DUP7 = 0x86,
    OP_DUP8 = 0x87,
    OP_DUP9 = 0x88,
    OP_DUP10 = 0x89,
    OP_DUP11 = 0x8a,
    OP_DUP12 = 0x8b,
    OP_DUP13 = 0x8c,
    OP_DUP14 = 0x8d,
    OP_DUP15 = 0x8e,
    OP_DUP16 = 0x8f,
    OP_SWAP1 = 0x90,
    OP_SWAP2 = 0x91,
    OP_SWAP3 = 0x92,
    OP_SWAP4 = 0x93,
    OP_SWAP5 = 0x94,
    OP_SWAP6 = 0x95,
    OP_SWAP7 = 0x96,
    OP_SWAP8 = 0x97,
    OP_SWAP9 = 0x98,
    OP_SWAP10 = 0x99,
    OP_SWAP11 = 0x9a,
    OP_SWAP12 = 0x9b,
    OP_SWAP13 = 0x9c,
    OP_SWAP14 = 0x9d,
    OP_SWAP15 = 0x9e,
    OP_SWAP16 = 0x9f,
    OP_LOG0 = 0xa0,
    OP_LOG1 = 0xa1,
    OP_LOG2 = 0xa2,
    OP_CALL = 0xf1,
    OP_RETURN = 0xf3,
    OP_DELEGATECALL = 0xf4,
    OP_STATICCALL = 0xfa,
    OP_REVERT = 0xfd,
};

struct OpInfo
{
    std::string_view name;  ///< empty for opcodes outside the subset
    std::uint8_t inputs = 0;
    std::uint8_t outputs = 0;
    Gas gas = 0;
};

/// Versioned flat gas schedule. Costs are per-instruction constants: no memory expansion,
/// no warm/cold accounting, no refunds.
inline constexpr int kCostTableVersion = 1;

/// Gas the caller keeps back when a call forwards "all remaining" gas.
inline constexpr Gas kCallRetainedGas = 2300;

inline constexpr std::size_t kMaxStackDepth = 1024;
inline constexpr std::size_t kMaxCallDepth = 1024;
/// Memory accesses beyond this offset raise out-of-gas (stands in for expansion cost).
inline constexpr std::size_t kMaxMemoryBytes = 1u << 20;

namespace detail
{
constexpr std::array<OpInfo, 256> make_op_table()
{
    std::array<OpInfo, 256> t{};
    t[OP_STOP] = {"STOP", 0, 0, 0};
    t[OP_ADD] = {"ADD", 2, 1, 3};
    t[OP_MUL] = {"MUL", 2, 1, 5};
    t[OP_SUB] = {"SUB", 2, 1, 3};
    t[OP_SDIV] = {"SDIV", 2, 1, 5};
    t[OP_ADDMOD] = {"ADDMOD", 3, 1, 8};
    t[OP_MULMOD] = {"MULMOD", 3, 1, 8};
    t[OP_EXP] = {"EXP", 2, 1, 10};
    t[OP_LT] = {"LT", 2, 1, 3};
    t[OP_GT] = {"GT", 2, 1, 3};
    t[OP_EQ] = {"EQ", 2, 1, 3};
    t[OP_ISZERO] = {"ISZERO", 1, 1, 3};
    t[OP_AND] = {"AND", 2, 1, 3};
    t[OP_OR] = {"OR", 2, 1, 3};
    t[OP_NOT] = {"NOT", 1, 1, 3};
    t[OP_SHA3] = {"SHA3", 2, 1, 36};
    t[OP_BALANCE] = {"BALANCE", 1, 1, 700};
    t[OP_CALLER] = {"CALLER", 0, 1, 2};
    t[OP_CALLVALUE] = {"CALLVALUE", 0, 1, 2};
    t[OP_CALLDATALOAD] = {"CALLDATALOAD", 1, 1, 3};
    t[OP_CALLDATASIZE] = {"CALLDATASIZE", 0, 1, 2};
    t[OP_SELFBALANCE] = {"SELFBALANCE", 0, 1, 5};
    t[OP_POP] = {"POP", 1, 0, 2};
    t[OP_MLOAD] = {"MLOAD", 1, 1, 3};
    t[OP_MSTORE] = {"MSTORE", 2, 0, 3};
    t[OP_SLOAD] = {"SLOAD", 1, 1, 800};
    t[OP_SSTORE] = {"SSTORE", 2, 0, 5000};
    t[OP_JUMP] = {"JUMP", 1, 0, 8};
    t[OP_JUMPI] = {"JUMPI", 2, 0, 10};
    t[OP_PC] = {"PC", 0, 1, 2};
    t[OP_GAS] = {"GAS", 0, 1, 2};
    t[OP_JUMPDEST] = {"JUMPDEST", 0, 0, 1};
    constexpr std::string_view push_names[] = {
        "PUSH1", "PUSH2", "PUSH3", "PUSH4", "PUSH5", "PUSH6", "PUSH7", "PUSH8", "PUSH9", "PUSH10", "PUSH11",
        "PUSH12", "PUSH13", "PUSH14", "PUSH15", "PUSH16", "PUSH17", "PUSH18", "PUSH19", "PUSH20", "PUSH21",
        "PUSH22", "PUSH23", "PUSH24", "PUSH25", "PUSH26", "PUSH27", "PUSH28", "PUSH29", "PUSH30", "PUSH31",
        "PUSH32"};
    for (int i = 0; i < 32; ++i)
        t[OP_PUSH1 + i] = {push_names[i], 0, 1, 3};
    constexpr std::string_view dup_names[] = {"DUP1", "DUP2", "DUP3", "DUP4", "DUP5", "DUP6", "DUP7", "DUP8",
        "DUP9", "DUP10", "DUP11", "DUP12", "DUP13", "DUP14", "DUP15", "DUP16"};
    constexpr std::string_view swap_names[] = {"SWAP1", "SWAP2", "SWAP3", "SWAP4", "SWAP5", "SWAP6", "SWAP7",
        "SWAP8", "SWAP9", "SWAP10", "SWAP11", "SWAP12", "SWAP13", "SWAP14", "SWAP15", "SWAP16"};
    for (int i = 0; i < 16; ++i)
    {
        t[OP_DUP1 + i] = {dup_names[i], static_cast<std::uint8_t>(i + 1), static_cast<std::uint8_t>(i + 2), 3};
        t[OP_SWAP1 + i] = {swap_names[i], static_cast<std::uint8_t>(i + 2), static_cast<std::uint8_t>(i + 2), 3};
    }
    t[OP_LOG0] = {"LOG0", 2, 0, 375};
    t[OP_LOG1] = {"LOG1", 3, 0, 750};
    t[OP_LOG2] = {"LOG2", 4, 0, 1125};
    t[OP_CALL] = {"CALL", 7, 1, 700};
    t[OP_RETURN] = {"RETURN", 2, 0, 0};
    t[OP_DELEGATECALL] = {"DELEGATECALL", 6, 1, 700};
    t[OP_STATICCALL] = {"STATICCALL", 6, 1, 700};
    t[OP_REVERT] = {"REVERT", 2, 0, 0};
    return t;
}
}  // namespace detail

inline constexpr std::array<OpInfo, 256> kOpTable = detail::make_op_table();

constexpr const OpInfo& op_info(std::uint8_t opcode) noexcept
{
    return kOpTable[opcode];
}

constexpr bool is_supported(std::uint8_t opcode) noexcept
{
    return !kOpTable[opcode].name.empty();
}

constexpr bool is_push(std::uint8_t opcode) noexcept
{
    return opcode >= OP_PUSH1 && opcode <= OP_PUSH32;
}

constexpr bool is_call(std::uint8_t opcode) noexcept
{
    return opcode == OP_CALL || opcode == OP_STATICCALL || opcode == OP_DELEGATECALL;
}

constexpr bool is_halt(std::uint8_t opcode) noexcept
{
    return opcode == OP_STOP || opcode == OP_RETURN || opcode == OP_REVERT;
}

/// Mnemonic as printed in structured logs ("opcode 0xNN" for bytes outside the subset).
inline std::string mnemonic(std::uint8_t opcode)
{
    if (is_supported(opcode))
        return std::string(kOpTable[opcode].name);
    static constexpr char hex[] = "0123456789abcdef";
    return std::string("opcode 0x") + hex[opcode >> 4] + hex[opcode & 0xf];
}

/// Reverse lookup; nullopt for names outside the subset.
inline std::optional<std::uint8_t> opcode_from_mnemonic(std::string_view name) noexcept
{
    for (std::size_t i = 0; i < kOpTable.size(); ++i)
        if (!kOpTable[i].name.empty() && kOpTable[i].name == name)
            return static_cast<std::uint8_t>(i);
    return std::nullopt;
}

inline std::optional<IntOp> int_op(std::uint8_t opcode) noexcept
{
    switch (opcode)
    {
    case OP_ADD:
        return IntOp::add;
    case OP_MUL:
        return IntOp::mul;
    case OP_SUB:
        return IntOp::sub;
    case OP_SDIV:
        return IntOp::sdiv;
    case OP_ADDMOD:
        return IntOp::addmod;
    case OP_MULMOD:
        return IntOp::mulmod;
    case OP_EXP:
        return IntOp::exp;
    default:
        return std::nullopt;
    }
}
}  // namespace evmioc
