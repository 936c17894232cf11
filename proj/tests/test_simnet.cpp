// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#include "evmioc/fixtures.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace evmioc;
namespace fs = std::filesystem;

namespace
{
struct Shape
{
    const char* scenario;
    std::size_t txs;
    std::size_t exploits;
    std::size_t blocks;
};

// Transactions, exploit transactions and blocks per scenario, as in the evaluation table.
const Shape kShapes[] = {
    {"Bank", 82, 6, 42},
    {"DelayedUnderflow", 23, 11, 22},
    {"ProductVote", 115, 20, 38},
    {"SimulationBECToken", 56, 12, 25},
    {"SimulationKotET", 151, 4, 24},
    {"TargetUnderflow", 20, 20, 20},
};

std::string dir_fingerprint(const fs::path& dir)
{
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file())
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string acc;
    for (const auto& p : files)
    {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        acc += fs::relative(p, dir).string() + ":" + digest(ss.str()).hex() + "\n";
    }
    return digest(acc).hex();
}

fs::path temp_dir(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("evmioc_simnet_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

std::size_t count_txs(const ArchiveNode& node)
{
    std::size_t n = 0;
    for (const auto& b : node.chain())
        n += b.txs.size();
    return n;
}
}  // namespace

class ScenarioShape : public ::testing::TestWithParam<Shape>
{
};

TEST_P(ScenarioShape, MatchesConfiguredCounts)
{
    const Shape shape = GetParam();
    const Fixture f = build_fixture_chain(shape.scenario, 7);
    EXPECT_EQ(f.node.height(), shape.blocks);
    EXPECT_EQ(count_txs(f.node), shape.txs);
    std::size_t exploits = 0;
    for (const auto& b : f.node.chain())
        for (const auto& tx : b.txs)
        {
            ASSERT_TRUE(f.labels.contains(tx.hash)) << "unlabeled tx";
            exploits += f.labels.at(tx.hash).exploit();
        }
    EXPECT_EQ(exploits, shape.exploits);
    EXPECT_EQ(f.labels.size(), shape.txs);
    EXPECT_FALSE(first_replay_mismatch(f.node).has_value());
}

TEST_P(ScenarioShape, SameSeedSameFiles)
{
    const Shape shape = GetParam();
    const fs::path a = temp_dir(std::string(shape.scenario) + "_a"), b = temp_dir(std::string(shape.scenario) + "_b");
    write_fixture(build_fixture_chain(shape.scenario, 3), a);
    write_fixture(build_fixture_chain(shape.scenario, 3), b);
    EXPECT_EQ(dir_fingerprint(a), dir_fingerprint(b));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_P(ScenarioShape, DifferentSeedsDiffer)
{
    const Shape shape = GetParam();
    EXPECT_NE(build_fixture_chain(shape.scenario, 1).node.head().hash,
              build_fixture_chain(shape.scenario, 2).node.head().hash);
}

INSTANTIATE_TEST_SUITE_P(AllScenarios, ScenarioShape, ::testing::ValuesIn(kShapes),
                         [](const auto& info) { return std::string(info.param.scenario); });

TEST(Simnet, UnknownScenarioIsUsageError)
{
    EXPECT_THROW((void)build_fixture_chain("Nope", 1), UsageError);
}

TEST(Simnet, EmptyBlockKeepsRoot)
{
    GlobalState g;
    g.set_balance(Address::from_number(1), 5);
    ArchiveNode node(g);
    const auto mined = mine_block(node, {});
    EXPECT_TRUE(mined.block.txs.empty());
    EXPECT_EQ(mined.block.state_root, node.block(0).state_root);
}

TEST(Simnet, TwoTransfersInOneBlock)
{
    const Address a = Address::from_number(1), b = Address::from_number(2), c = Address::from_number(3);
    GlobalState g;
    g.set_balance(a, 100);
    g.set_balance(b, 50);
    ArchiveNode node(g);
    const Hash32 genesis_root = node.block(0).state_root;
    mine_block(node, {Transaction::make(a, c, 30, {}, 1), Transaction::make(b, c, 20, {}, 2)});
    const GlobalState& post = node.state(node.head().state_root);
    EXPECT_EQ(post.balance(a), 70);
    EXPECT_EQ(post.balance(b), 30);
    EXPECT_EQ(post.balance(c), 50);
    EXPECT_EQ(node.state(genesis_root).balance(a), 100);
}

TEST(Simnet, RevertingTxDoesNotAffectRoot)
{
    const Address a = Address::from_number(1), c = Address::from_number(3), tok = Address::from_number(9);
    GlobalState g;
    g.set_balance(a, 100);
    g.set_code(tok, build_delayed_underflow().code);
    const auto good = Transaction::make(a, c, 30, {}, 1);
    const auto bad = Transaction::make(a, tok, 0, encode_call(sig::transfer, {c.to_word(), kDelayedTransferCap + 1}), 2);
    ArchiveNode with(g), without(g);
    const auto m = mine_block(with, {good, bad});
    mine_block(without, {good});
    EXPECT_FALSE(m.block.receipts[1].success);
    EXPECT_EQ(with.head().state_root, without.head().state_root);
}

TEST(Simnet, BecHasInternalAndOccludedExploits)
{
    const Fixture f = build_fixture_chain("SimulationBECToken", 11);
    std::size_t internal_exploits = 0, occluded = 0;
    for (const auto& b : f.node.chain())
        for (std::size_t i = 0; i < b.txs.size(); ++i)
        {
            const auto& tx = b.txs[i];
            if (!f.labels.at(tx.hash).exploit())
                continue;
            if (tx.to != f.vuln.contract)
            {
                ++internal_exploits;
                const bool routed = std::any_of(f.feed.begin(), f.feed.end(), [&](const TxRef& r) {
                    return r.internal && r.parent_tx_hash == tx.hash && r.to == f.vuln.contract;
                });
                EXPECT_TRUE(routed);
            }
            // an exploit whose sender balance is back to its pre-block value
            const auto [pre, post] = big_step_lookup(f.node, b.number);
            const Word256 slot = mapping_slot(tx.sender, layout::balances);
            if (tx.to == f.vuln.contract && pre.storage(f.vuln.contract, slot) == post.storage(f.vuln.contract, slot))
                ++occluded;
        }
    EXPECT_EQ(internal_exploits, 3u);
    EXPECT_EQ(occluded, 1u);
}

TEST(Simnet, KotetExploitsFailAtTheRefundCall)
{
    const Fixture f = build_fixture_chain("SimulationKotET", 5);
    const auto& pcs = f.vuln.vuln_locs.at(0).pcs;
    std::size_t checked = 0;
    for (const auto& [hash, label] : f.labels)
    {
        if (!label.exploit())
            continue;
        const auto& doc = f.traces.at(hash);
        EXPECT_TRUE(doc.summary.failed);
        const bool failed_call = std::any_of(doc.steps.begin(), doc.steps.end(), [&](const TraceStep& s) {
            return s.op == OP_CALL && pcs.contains(s.pc) && s.call && s.call->value > 0 && s.call->return_status == Word256{0};
        });
        EXPECT_TRUE(failed_call);
        ++checked;
    }
    EXPECT_EQ(checked, 4u);
}

TEST(Simnet, DelayedUnderflowHasOneRevertedExploit)
{
    const Fixture f = build_fixture_chain("DelayedUnderflow", 5);
    std::size_t failed = 0;
    for (const auto& b : f.node.chain())
        for (std::size_t i = 0; i < b.txs.size(); ++i)
            failed += f.labels.at(b.txs[i].hash).exploit() && !b.receipts[i].success;
    EXPECT_EQ(failed, 1u);
}

TEST(Simnet, WriteLoadRoundTrip)
{
    const Fixture f = build_fixture_chain("Bank", 4);
    const fs::path dir = temp_dir("roundtrip");
    write_fixture(f, dir);
    const LoadedFixture l = load_fixture(dir);
    EXPECT_EQ(l.scenario, "Bank");
    EXPECT_EQ(l.seed, 4u);
    EXPECT_EQ(l.node.chain(), f.node.chain());
    EXPECT_EQ(l.labels, f.labels);
    EXPECT_EQ(l.vuln, f.vuln);
    for (const auto& [root, state] : f.node.world())
        EXPECT_EQ(state_root(l.node.state(root)), root);
    EXPECT_FALSE(first_replay_mismatch(l.node).has_value());
    EXPECT_EQ(parse_csv_feed((dir / "feed.csv").string()), f.feed);
    for (const auto& [h, doc] : f.traces)
    {
        std::ifstream in(dir / "traces" / (h.plain_hex() + ".json"));
        std::stringstream ss;
        ss << in.rdbuf();
        ASSERT_EQ(ss.str(), serialize_trace(doc));
    }
    EXPECT_TRUE(fs::exists(dir / "disasm" / "Bank.txt"));
    fs::remove_all(dir);
}

TEST(Simnet, TamperedSnapshotIsRejected)
{
    const Fixture f = build_fixture_chain("TargetUnderflow", 4);
    const fs::path dir = temp_dir("tamper");
    write_fixture(f, dir);
    const fs::path state = dir / "states" / (f.node.head().state_root.plain_hex() + ".json");
    std::ifstream in(state);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    const auto pos = text.find("\"balance\":\"0x");
    ASSERT_NE(pos, std::string::npos);
    text.insert(pos + 13, "1");
    std::ofstream(state, std::ios::trunc) << text;
    EXPECT_THROW((void)load_fixture(dir), ProtocolError);
    fs::remove_all(dir);
}

TEST(ScaleFixture, InstructionAxisHitsTargetLength)
{
    for (const std::uint64_t target : {21000ull, 42000ull})
    {
        const Fixture f = scale_fixture("DelayedUnderflow", "instructions", target);
        ASSERT_EQ(f.traces.size(), 1u);
        const double len = static_cast<double>(f.traces.begin()->second.steps.size());
        EXPECT_NEAR(len, static_cast<double>(target), 0.02 * static_cast<double>(target));
        EXPECT_FALSE(f.traces.begin()->second.summary.failed);
    }
}

TEST(ScaleFixture, MagnitudeZeroIsBase)
{
    const Fixture f = scale_fixture("DelayedUnderflow", "instructions", 0);
    const Account* acc = f.node.state(f.node.block(0).state_root).find(f.vuln.contract);
    ASSERT_NE(acc, nullptr);
    EXPECT_EQ(acc->code_hash, digest(build_delayed_underflow(0).code));
    const Fixture g = scale_fixture("TargetUnderflow", "storage", 0);
    EXPECT_EQ(g.node.state(g.node.block(0).state_root).find(g.vuln.contract)->storage.size(), 1u);
}

TEST(ScaleFixture, StorageAxisEntryCount)
{
    const Fixture base = scale_fixture("TargetUnderflow", "storage", 0);
    const Fixture f = scale_fixture("TargetUnderflow", "storage", 1024);
    const auto entries = [](const Fixture& x) {
        return x.node.state(x.node.block(0).state_root).find(x.vuln.contract)->storage.size();
    };
    EXPECT_EQ(entries(f), 1024 + entries(base));
}

TEST(ScaleFixture, CeilingsAndAxisChecks)
{
    EXPECT_THROW((void)scale_fixture("DelayedUnderflow", "instructions", 100'000'000), UsageError);
    EXPECT_THROW((void)scale_fixture("TargetUnderflow", "storage", 2'000'000), UsageError);
    EXPECT_THROW((void)scale_fixture("TargetUnderflow", "instructions", 100), UsageError);
    EXPECT_THROW((void)scale_fixture("DelayedUnderflow", "storage", 100), UsageError);
    EXPECT_THROW((void)scale_fixture("DelayedUnderflow", "width", 100), UsageError);
    ScaleLimits tight;
    tight.storage_ceiling = 10;
    EXPECT_THROW((void)scale_fixture("TargetUnderflow", "storage", 11, 1, tight), UsageError);
    EXPECT_NO_THROW((void)scale_fixture("TargetUnderflow", "storage", 10, 1, tight));
}
