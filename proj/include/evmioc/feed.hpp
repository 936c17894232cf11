// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "abi.hpp"
#include "digest.hpp"
#include "errors.hpp"
#include "word.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace evmioc
{
/// One relevant transaction, external or internal (a message call made during execution).
struct TxRef
{
    std::uint64_t block_number = 0;
    std::uint64_t tx_index = 0;  ///< intra-block index of the external transaction
    Hash32 tx_hash;
    Address sender;
    Address to;
    Wei value = 0;
    std::optional<Selector> selector;
    bool internal = false;
    std::optional<Hash32> parent_tx_hash;

    bool operator==(const TxRef&) const = default;

    /// The external transaction that has to be replayed to analyze this one.
    const Hash32& external_hash() const { return internal ? *parent_tx_hash : tx_hash; }
};

/// Identifier of the internal call made at structLogs position `raw_index` of `parent`.
inline Hash32 internal_tx_hash(const Hash32& parent, std::uint64_t raw_index)
{
    ByteWriter w;
    w.hash(parent);
    w.u64(raw_index);
    return w.finish();
}

inline constexpr const char* kFeedHeader = "block_number,tx_hash,from,to,value,input_selector,internal,parent_tx_hash";

inline std::string feed_row(const TxRef& r)
{
    std::string out = std::to_string(r.block_number);
    out += ',' + r.tx_hash.hex();
    out += ',' + r.sender.hex();
    out += ',' + r.to.hex();
    out += ',' + to_hex_quantity(r.value);
    out += ',' + (r.selector ? r.selector->hex() : std::string{});
    out += r.internal ? ",true," : ",false,";
    out += r.parent_tx_hash ? r.parent_tx_hash->hex() : std::string{};
    return out;
}

inline std::string write_csv_feed(const std::vector<TxRef>& rows)
{
    std::string out = kFeedHeader;
    out += '\n';
    for (const auto& r : rows)
    {
        out += feed_row(r);
        out += '\n';
    }
    return out;
}

namespace detail
{
inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line)
{
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i)
        if (i == line.size() || line[i] == ',')
        {
            cols.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    return cols;
}
}  // namespace detail

/// Parses the feed CSV. The tx_index column is implicit: rows of one block keep their order,
/// and internal rows inherit the index of their parent.
inline std::vector<TxRef> parse_csv_feed_text(std::string_view text)
{
    std::vector<TxRef> rows;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::uint64_t last_block = 0, index = 0;
    std::map<Hash32, std::uint64_t> external_index;
    std::size_t pos = 0;
    while (pos <= text.size())
    {
        const std::size_t nl = text.find('\n', pos);
        const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const std::string_view line = detail::trim(raw);
        if (line.empty())
            continue;
        const auto fail = [&](const std::string& why) {
            return ParseError("feed line " + std::to_string(line_no) + ": " + why, line_no);
        };
        if (!header_seen)
        {
            if (line != kFeedHeader)
                throw fail("expected header '" + std::string(kFeedHeader) + "'");
            header_seen = true;
            continue;
        }
        const auto cols = detail::split_commas(line);
        if (cols.size() != 8)
            throw fail("expected 8 columns, found " + std::to_string(cols.size()));
        try
        {
            TxRef r;
            r.block_number = static_cast<std::uint64_t>(parse_decimal_or_hex(cols[0]));
            r.tx_hash = Hash32::from_hex(cols[1]);
            r.sender = Address::from_hex(cols[2]);
            r.to = Address::from_hex(cols[3]);
            r.value = parse_decimal_or_hex(cols[4]);
            if (!cols[5].empty())
                r.selector = Selector::from_hex(cols[5]);
            if (cols[6] != "true" && cols[6] != "false")
                throw fail("internal must be true or false");
            r.internal = cols[6] == "true";
            if (!cols[7].empty())
                r.parent_tx_hash = Hash32::from_hex(cols[7]);
            if (r.internal && !r.parent_tx_hash)
                throw fail("internal row without parent_tx_hash");
            if (!r.internal && r.parent_tx_hash)
                throw fail("external row with parent_tx_hash");
            if (r.internal)
            {
                const auto it = external_index.find(*r.parent_tx_hash);
                r.tx_index = it != external_index.end() ? it->second : 0;
            }
            else
            {
                if (rows.empty() || r.block_number != last_block)
                    index = 0;
                else
                    ++index;
                last_block = r.block_number;
                r.tx_index = index;
                external_index[r.tx_hash] = index;
            }
            rows.push_back(std::move(r));
        }
        catch (const ParseError& e)
        {
            if (std::string_view(e.what()).starts_with("feed line"))
                throw;
            throw fail(e.what());
        }
    }
    if (!header_seen)
        throw ParseError("feed is missing its header line", 1);
    return rows;
}

inline std::vector<TxRef> parse_csv_feed(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open feed " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv_feed_text(ss.str());
}
}  // namespace evmioc
