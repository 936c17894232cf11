// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#include "evmioc/contracts.hpp"
#include "evmioc/filters.hpp"
#include "support/fixture_replay.hpp"

#include <gtest/gtest.h>

using namespace evmioc;
using evmioc::testing::fixture_on_disk;
using evmioc::testing::replay_observed;
using evmioc::testing::scenario_fixture;

namespace
{
FilterQuery whole_chain(const Fixture& f, bool internal)
{
    FilterQuery q;
    q.target = f.vuln.contract;
    q.from = 1;
    q.to = f.node.height();
    q.include_internal = internal;
    return q;
}

std::set<Hash32> external_hashes(const std::vector<TxRef>& refs)
{
    std::set<Hash32> out;
    for (const auto& r : refs)
        out.insert(r.external_hash());
    return out;
}

const std::vector<std::string> kScenarios = {"Bank",           "DelayedUnderflow", "ProductVote",
                                             "SimulationBECToken", "SimulationKotET",  "TargetUnderflow"};
}  // namespace

TEST(FilterQuery, InvertedRangeRejected)
{
    FilterQuery q;
    q.from = 5;
    q.to = 4;
    EXPECT_THROW(q.validate(), ConfigError);
}

TEST(TxList, EmptyRangeYieldsEmptyList)
{
    const Fixture& f = scenario_fixture("Bank");
    LocalBackend local(fixture_on_disk("Bank"));
    FilterQuery q = whole_chain(f, true);
    q.from = q.to = 0;
    EXPECT_TRUE(tx_list(local, q).empty());
    EXPECT_TRUE(tx_list(f.feed, q).empty());
}

TEST(TxList, BankWithdrawSelector)
{
    const Fixture& f = scenario_fixture("Bank");
    LocalBackend local(fixture_on_disk("Bank"));
    FilterQuery q = whole_chain(f, false);
    q.selectors = {function_selector(sig::withdraw)};
    const auto refs = tx_list(local, q);
    ASSERT_FALSE(refs.empty());
    std::size_t expected = 0;
    for (const auto& b : f.node.chain())
        for (const auto& t : b.txs)
            expected += t.to == f.vuln.contract && Selector::of_calldata(t.data) == function_selector(sig::withdraw);
    EXPECT_EQ(refs.size(), expected);
    for (const auto& r : refs)
        EXPECT_EQ(r.selector, function_selector(sig::withdraw));
    // Every labeled Bank exploit calls withdraw.
    const auto got = external_hashes(refs);
    for (const auto& [h, l] : f.labels)
    {
        if (l.exploit())
        {
            EXPECT_TRUE(got.contains(h));
        }
    }
}

TEST(TxList, InternalCallAppearsOnceUnderItsParent)
{
    const Fixture& f = scenario_fixture("SimulationBECToken");
    LocalBackend local(fixture_on_disk("SimulationBECToken"));
    const auto with = tx_list(local, whole_chain(f, true));
    const auto without = tx_list(local, whole_chain(f, false));
    std::size_t internal = 0;
    std::set<Hash32> parents;
    for (const auto& r : with)
        if (r.internal)
        {
            ++internal;
            EXPECT_TRUE(parents.insert(*r.parent_tx_hash).second);
            EXPECT_EQ(r.to, f.vuln.contract);
        }
    EXPECT_GE(internal, 3u);
    EXPECT_EQ(with.size(), without.size() + internal);
    EXPECT_EQ(external_hashes(with).size(), with.size());
}

TEST(TxList, OrderedByBlockAndIndex)
{
    const Fixture& f = scenario_fixture("SimulationBECToken");
    LocalBackend local(fixture_on_disk("SimulationBECToken"));
    const auto refs = tx_list(local, whole_chain(f, true));
    for (std::size_t i = 1; i < refs.size(); ++i)
        EXPECT_LT(std::tie(refs[i - 1].block_number, refs[i - 1].tx_index),
                  std::tie(refs[i].block_number, refs[i].tx_index));
}

TEST(TxList, WideningTheRangeNeverDropsTransactions)
{
    const Fixture& f = scenario_fixture("ProductVote");
    LocalBackend local(fixture_on_disk("ProductVote"));
    std::set<Hash32> previous;
    for (std::uint64_t to = 1; to <= f.node.height(); ++to)
    {
        FilterQuery q = whole_chain(f, true);
        q.to = to;
        const auto now = external_hashes(tx_list(local, q));
        EXPECT_TRUE(std::includes(now.begin(), now.end(), previous.begin(), previous.end())) << to;
        previous = now;
    }
}

TEST(TxList, RangeBeyondHeightIsRangeError)
{
    const Fixture& f = scenario_fixture("Bank");
    LocalBackend local(fixture_on_disk("Bank"));
    FilterQuery q = whole_chain(f, false);
    q.to = f.node.height() + 1;
    EXPECT_THROW((void)tx_list(local, q), RangeError);
}

class FilterCompleteness : public ::testing::TestWithParam<std::string>
{
};

// Oracle: re-execute the chain and collect every transaction whose execution ever ran in a frame
// owned by the target, or that was sent to it directly.
TEST_P(FilterCompleteness, MatchesReplayedExecution)
{
    const Fixture& f = scenario_fixture(GetParam());
    LocalBackend local(fixture_on_disk(GetParam()));
    std::set<Hash32> oracle;
    replay_observed(f, [&](const evmioc::testing::ReplayedTx& t) {
        bool touches = t.tx->to == f.vuln.contract;
        for (const auto& o : *t.observed)
            touches = touches || std::find(o.frame_ids.begin(), o.frame_ids.end(), f.vuln.contract) != o.frame_ids.end();
        if (touches)
            oracle.insert(t.tx->hash);
    });
    EXPECT_EQ(external_hashes(tx_list(local, whole_chain(f, true))), oracle);
    EXPECT_EQ(external_hashes(tx_list(f.feed, whole_chain(f, true))), oracle);
    for (const auto& [h, l] : f.labels)
    {
        if (l.exploit())
        {
            EXPECT_TRUE(oracle.contains(h));
        }
    }
}

TEST_P(FilterCompleteness, FeedAndExplorerAgree)
{
    const Fixture& f = scenario_fixture(GetParam());
    LocalBackend local(fixture_on_disk(GetParam()));
    for (bool internal : {false, true})
        EXPECT_EQ(tx_list(local, whole_chain(f, internal)), tx_list(f.feed, whole_chain(f, internal))) << internal;
}

INSTANTIATE_TEST_SUITE_P(AllScenarios, FilterCompleteness, ::testing::ValuesIn(kScenarios));

TEST(CsvFeed, HeaderOnlyIsEmpty)
{
    EXPECT_TRUE(parse_csv_feed_text(std::string(kFeedHeader) + "\n").empty());
    EXPECT_THROW((void)parse_csv_feed_text(""), ParseError);
}

TEST(CsvFeed, RoundTrip)
{
    for (const auto& name : kScenarios)
    {
        const Fixture& f = scenario_fixture(name);
        EXPECT_EQ(parse_csv_feed_text(write_csv_feed(f.feed)), f.feed) << name;
    }
}

TEST(CsvFeed, InternalRowWithoutParentRejected)
{
    const std::string row = "3,0x" + std::string(64, '1') + ",0x" + std::string(40, '2') + ",0x" + std::string(40, '3') +
                            ",0x0,,true,";
    try
    {
        (void)parse_csv_feed_text(std::string(kFeedHeader) + "\n" + row + "\n");
        FAIL() << "expected ParseError";
    }
    catch (const ParseError& e)
    {
        EXPECT_EQ(e.index(), 2u);
        EXPECT_NE(std::string(e.what()).find("parent_tx_hash"), std::string::npos);
    }
}

TEST(CsvFeed, ArityErrorNamesTheLine)
{
    const Fixture& f = scenario_fixture("Bank");
    std::string text = write_csv_feed(f.feed);
    text += "7,0xabc,0x1\n";
    const std::size_t expected_line = f.feed.size() + 2;
    try
    {
        (void)parse_csv_feed_text(text);
        FAIL() << "expected ParseError";
    }
    catch (const ParseError& e)
    {
        EXPECT_EQ(e.index(), expected_line);
        EXPECT_NE(std::string(e.what()).find("line " + std::to_string(expected_line)), std::string::npos);
    }
}
