// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "abi.hpp"
#include "arith.hpp"
#include "codec.hpp"
#include "errors.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace evmioc
{
/// Code locations of a known vulnerability: pc offsets inside the code of `code_address`.
struct VulnLoc
{
    Address code_address;
    std::set<std::uint64_t> pcs;

    bool operator==(const VulnLoc&) const = default;
};

/// How the block-level overflow rule finds the `_to` account(s) of a call.
struct ToDecoder
{
    enum class Kind
    {
        arg,    ///< static address argument
        array,  ///< dynamic address[] argument
    };
    Selector selector;
    Kind kind = Kind::arg;
    std::size_t index = 0;

    bool operator==(const ToDecoder&) const = default;
};

/// Contract-specific block-level rule configuration.
struct BlockRuleSpec
{
    std::string rule;                     ///< overflow | dos | reentrancy
    std::map<std::string, Word256> slots;  ///< e.g. balanceOfSlot, highestBidSlot, userBalancesSlot
    std::optional<Selector> selector;      ///< restricts candidate txs to one function
    std::vector<ToDecoder> to_decoders;

    bool operator==(const BlockRuleSpec&) const = default;

    Word256 slot(const std::string& name) const
    {
        const auto it = slots.find(name);
        if (it == slots.end())
            throw ConfigError("block rule '" + rule + "' requires slot '" + name + "'");
        return it->second;
    }
};

struct VulnSpec
{
    std::string name;
    Address contract;
    std::string evm_rule;  ///< overflow | dos | reentrancy
    std::vector<VulnLoc> vuln_locs;
    std::map<std::string, std::string> params;
    std::optional<BlockRuleSpec> block;

    bool operator==(const VulnSpec&) const = default;

    bool contains(const Address& code_address, std::uint64_t pc) const
    {
        for (const auto& loc : vuln_locs)
            if (loc.code_address == code_address && loc.pcs.contains(pc))
                return true;
        return false;
    }

    /// IntTypeBounds from params typeMin/typeMax (decimal or 0x-hex, optionally negative).
    IntTypeBounds bounds() const
    {
        const auto lo = params.find("typeMin");
        const auto hi = params.find("typeMax");
        if (lo == params.end() || hi == params.end())
            throw ConfigError("vulnerability spec '" + name + "' lacks typeMin/typeMax params");
        return IntTypeBounds::make(parse_bigint(lo->second), parse_bigint(hi->second));
    }

    Json to_json() const
    {
        Json locs = Json::array();
        for (const auto& l : vuln_locs)
            locs.push_back({{"codeAddress", l.code_address.hex()}, {"pcOffsets", l.pcs}});
        Json j = {
            {"name", name},
            {"contractAddress", contract.hex()},
            {"evmRule", evm_rule},
            {"vulnLocs", locs},
            {"params", params},
        };
        if (block)
        {
            Json slots = Json::object();
            for (const auto& [k, v] : block->slots)
                slots[k] = to_hex_quantity(v);
            Json decoders = Json::array();
            for (const auto& d : block->to_decoders)
                decoders.push_back({{"selector", d.selector.hex()},
                                    {"kind", d.kind == ToDecoder::Kind::arg ? "arg" : "array"},
                                    {"index", d.index}});
            Json b = {{"rule", block->rule}, {"slots", slots}, {"toDecoders", decoders}};
            if (block->selector)
                b["selector"] = block->selector->hex();
            j["blockRule"] = b;
        }
        return j;
    }

    static VulnSpec from_json(const Json& j)
    {
        try
        {
            VulnSpec s;
            s.name = j.value("name", std::string{});
            s.contract = Address::from_hex(codec::str(j, "contractAddress"));
            s.evm_rule = j.value("evmRule", std::string{});
            for (const auto& l : codec::require(j, "vulnLocs"))
            {
                VulnLoc loc;
                loc.code_address = Address::from_hex(codec::str(l, "codeAddress"));
                for (const auto& pc : codec::require(l, "pcOffsets"))
                    loc.pcs.insert(pc.get<std::uint64_t>());
                if (loc.pcs.empty())
                    throw ConfigError("vulnLocs entry for " + loc.code_address.hex() + " has no pcOffsets");
                s.vuln_locs.push_back(std::move(loc));
            }
            if (j.contains("params"))
                for (const auto& [k, v] : j.at("params").items())
                    s.params[k] = v.is_string() ? v.get<std::string>() : v.dump();
            if (j.contains("blockRule"))
            {
                const Json& b = j.at("blockRule");
                BlockRuleSpec br;
                br.rule = codec::str(b, "rule");
                if (b.contains("slots"))
                    for (const auto& [k, v] : b.at("slots").items())
                        br.slots[k] = parse_decimal_or_hex(v.get<std::string>());
                if (b.contains("selector"))
                    br.selector = Selector::from_hex(b.at("selector").get<std::string>());
                if (b.contains("toDecoders"))
                    for (const auto& d : b.at("toDecoders"))
                    {
                        const std::string kind = codec::str(d, "kind");
                        if (kind != "arg" && kind != "array")
                            throw ConfigError("toDecoders kind must be 'arg' or 'array'");
                        br.to_decoders.push_back({Selector::from_hex(codec::str(d, "selector")),
                                                  kind == "arg" ? ToDecoder::Kind::arg : ToDecoder::Kind::array,
                                                  d.at("index").get<std::size_t>()});
                    }
                s.block = std::move(br);
            }
            return s;
        }
        catch (const nlohmann::json::exception& e)
        {
            throw ConfigError(std::string("malformed vulnerability spec: ") + e.what());
        }
        catch (const ProtocolError& e)
        {
            throw ConfigError(std::string("malformed vulnerability spec: ") + e.what());
        }
    }

    static VulnSpec load(const std::string& path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot open vulnerability spec " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        try
        {
            return from_json(Json::parse(ss.str()));
        }
        catch (const nlohmann::json::parse_error& e)
        {
            throw ConfigError("vulnerability spec " + path + " is not JSON: " + e.what());
        }
    }
};
}  // namespace evmioc
