// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chain.hpp"
#include "errors.hpp"
#include "state.hpp"
#include "transaction.hpp"

#include <json.hpp>

#include <string>

// JSON shapes shared by the fixture files, the explorer backends and the RPC wire format.
// nlohmann::json keeps object keys sorted, so every dump() is byte-deterministic.

namespace evmioc
{
using Json = nlohmann::json;

namespace codec
{
inline const Json& require(const Json& obj, const char* key)
{
    if (!obj.is_object())
        throw ProtocolError(std::string("expected an object holding '") + key + "'");
    const auto it = obj.find(key);
    if (it == obj.end())
        throw ProtocolError(std::string("missing field '") + key + "'");
    return *it;
}

inline std::string str(const Json& obj, const char* key)
{
    const Json& v = require(obj, key);
    if (!v.is_string())
        throw ProtocolError(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

inline Json tx_to_json(const Transaction& tx)
{
    Json j = {
        {"hash", tx.hash.hex()},
        {"from", tx.sender.hex()},
        {"to", tx.to.hex()},
        {"value", to_hex_quantity(tx.value)},
        {"input", to_hex(tx.data, true)},
        {"nonce", to_hex_quantity(tx.nonce)},
    };
    if (tx.parent_tx_hash)
        j["parentTxHash"] = tx.parent_tx_hash->hex();
    return j;
}

inline Transaction tx_from_json(const Json& j)
{
    Transaction tx;
    tx.hash = Hash32::from_hex(str(j, "hash"));
    tx.sender = Address::from_hex(str(j, "from"));
    tx.to = Address::from_hex(str(j, "to"));
    tx.value = word_from_hex(str(j, "value"));
    tx.data = bytes_from_hex(str(j, "input"));
    tx.nonce = u64_from_hex(str(j, "nonce"));
    if (j.contains("parentTxHash"))
        tx.parent_tx_hash = Hash32::from_hex(str(j, "parentTxHash"));
    return tx;
}

inline Json log_to_json(const LogEntry& log)
{
    Json topics = Json::array();
    for (const auto& t : log.topics)
        topics.push_back("0x" + to_hex_word(t));
    return {{"address", log.address.hex()}, {"topics", topics}, {"data", to_hex(log.data, true)}};
}

inline LogEntry log_from_json(const Json& j)
{
    LogEntry log;
    log.address = Address::from_hex(str(j, "address"));
    for (const auto& t : require(j, "topics"))
        log.topics.push_back(word_from_hex(t.get<std::string>()));
    log.data = bytes_from_hex(str(j, "data"));
    return log;
}

inline Json receipt_to_json(const Receipt& r)
{
    Json logs = Json::array();
    for (const auto& l : r.logs)
        logs.push_back(log_to_json(l));
    return {
        {"transactionHash", r.tx_hash.hex()},
        {"status", r.success ? "0x1" : "0x0"},
        {"gasUsed", to_hex_quantity(static_cast<std::uint64_t>(r.gas_used))},
        {"logs", logs},
    };
}

inline Receipt receipt_from_json(const Json& j)
{
    Receipt r;
    r.tx_hash = Hash32::from_hex(str(j, "transactionHash"));
    const std::string status = str(j, "status");
    if (status != "0x1" && status != "0x0")
        throw ProtocolError("receipt status must be 0x0 or 0x1");
    r.success = status == "0x1";
    r.gas_used = static_cast<Gas>(u64_from_hex(str(j, "gasUsed")));
    for (const auto& l : require(j, "logs"))
        r.logs.push_back(log_from_json(l));
    return r;
}

/// Block header plus full transactions (no receipts): the eth_getBlockByNumber(n, true) shape.
inline Json block_header_to_json(const Block& b)
{
    Json txs = Json::array();
    for (const auto& tx : b.txs)
        txs.push_back(tx_to_json(tx));
    return {
        {"number", to_hex_quantity(b.number)},
        {"hash", b.hash.hex()},
        {"parentHash", b.parent.hex()},
        {"stateRoot", b.state_root.hex()},
        {"transactions", txs},
    };
}

inline Json block_to_json(const Block& b)
{
    Json j = block_header_to_json(b);
    Json receipts = Json::array();
    for (const auto& r : b.receipts)
        receipts.push_back(receipt_to_json(r));
    j["receipts"] = receipts;
    return j;
}

inline Block block_from_json(const Json& j)
{
    Block b;
    b.number = u64_from_hex(str(j, "number"));
    b.hash = Hash32::from_hex(str(j, "hash"));
    b.parent = Hash32::from_hex(str(j, "parentHash"));
    b.state_root = Hash32::from_hex(str(j, "stateRoot"));
    for (const auto& t : require(j, "transactions"))
        b.txs.push_back(tx_from_json(t));
    for (const auto& r : require(j, "receipts"))
        b.receipts.push_back(receipt_from_json(r));
    if (b.txs.size() != b.receipts.size())
        throw ProtocolError("block " + std::to_string(b.number) + " has mismatched tx/receipt counts");
    return b;
}

/// Account snapshot without code bytes (code lives in the content-addressed code store).
inline Json state_to_json(const GlobalState& s)
{
    Json accounts = Json::object();
    for (const auto& [addr, acc] : s.accounts())
    {
        Json storage = Json::object();
        for (const auto& [k, v] : acc.storage)
            if (v != 0)
                storage["0x" + to_hex_word(k)] = "0x" + to_hex_word(v);
        accounts[addr.hex()] = {
            {"nonce", to_hex_quantity(acc.nonce)},
            {"balance", to_hex_quantity(acc.balance)},
            {"codeHash", acc.code_hash.hex()},
            {"storage", storage},
        };
    }
    return {{"stateRoot", state_root(s).hex()}, {"accounts", accounts}};
}

/// Inverse of state_to_json. Code bytes are not attached; see attach_code().
inline GlobalState state_from_json(const Json& j)
{
    GlobalState s;
    for (const auto& [addr_hex, a] : require(j, "accounts").items())
    {
        Account& acc = s.get_or_create(Address::from_hex(addr_hex));
        acc.nonce = u64_from_hex(str(a, "nonce"));
        acc.balance = word_from_hex(str(a, "balance"));
        acc.code_hash = Hash32::from_hex(str(a, "codeHash"));
        for (const auto& [k, v] : require(a, "storage").items())
        {
            const Word256 value = word_from_hex(v.get<std::string>());
            if (value != 0)
                acc.storage[word_from_hex(k)] = value;
        }
    }
    const auto expected = Hash32::from_hex(str(j, "stateRoot"));
    if (state_root(s) != expected)
        throw ProtocolError("state snapshot digest mismatch for " + expected.hex());
    return s;
}

/// Reads one storage slot straight from a snapshot document (zero when absent).
inline Word256 storage_from_state_json(const Json& j, const Address& a, const Word256& key)
{
    const auto& accounts = require(j, "accounts");
    const auto acc = accounts.find(a.hex());
    if (acc == accounts.end())
        return 0;
    const auto& storage = require(*acc, "storage");
    const auto it = storage.find("0x" + to_hex_word(key));
    return it == storage.end() ? Word256{0} : word_from_hex(it->get<std::string>());
}

inline Wei balance_from_state_json(const Json& j, const Address& a)
{
    const auto& accounts = require(j, "accounts");
    const auto acc = accounts.find(a.hex());
    return acc == accounts.end() ? Wei{0} : word_from_hex(str(*acc, "balance"));
}
}  // namespace codec
}  // namespace evmioc
