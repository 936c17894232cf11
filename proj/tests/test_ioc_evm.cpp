// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#include "evmioc/ioc_evm.hpp"
#include "oracle/bigint_oracle.hpp"
#include "support/fixture_replay.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace evmioc;
using evmioc::testing::fixture_on_disk;
using evmioc::testing::scenario_fixture;
using evmioc::testing::scratch_dir;

namespace
{
const Address kCode = Address::from_number(0xc0de);

VulnSpec spec_at(std::initializer_list<std::uint64_t> pcs)
{
    VulnSpec v;
    v.name = "unit";
    v.contract = kCode;
    v.vuln_locs.push_back(VulnLoc{kCode, pcs});
    v.params = {{"typeMin", "0"}, {"typeMax", (~Word256{0}).str()}};
    return v;
}

/// Stack listed top first, stored top last.
TraceStep step(std::uint8_t op, std::uint64_t pc, std::vector<Word256> top_first)
{
    TraceStep s;
    s.op = op;
    s.pc = pc;
    s.stack.assign(top_first.rbegin(), top_first.rend());
    return s;
}

TraceStep call_step(std::uint8_t op, std::uint64_t pc, Word256 status)
{
    TraceStep s = step(op, pc, {0, Address::from_number(9).to_word(), 0, 0, 0, 0, 0});
    s.call = CallInfo{Address::from_number(9), 0, status, {}};
    return s;
}

const IntTypeBounds kU256 = IntTypeBounds::make(0, (BigInt{1} << 256) - 1);

std::vector<TxRef> external_refs(const Fixture& f)
{
    std::vector<TxRef> refs;
    for (const auto& r : f.feed)
        if (!r.internal)
            refs.push_back(r);
    return refs;
}

std::set<Hash32> exploit_hashes(const Fixture& f)
{
    std::set<Hash32> out;
    for (const auto& [h, l] : f.labels)
        if (l.exploit())
            out.insert(h);
    return out;
}

std::set<Hash32> detected_hashes(const EvmRunResult& r)
{
    std::set<Hash32> out;
    for (const auto& d : r.detections)
        out.insert(d.tx_hash);
    return out;
}
}  // namespace

TEST(DetectOverflow, SubUnderflowAtVulnPc)
{
    const auto d = detect_overflow(step(OP_SUB, 8, {0, 1}), kCode, spec_at({8}), kU256);
    ASSERT_TRUE(d);
    EXPECT_EQ((*d)["zResult"], "-1");
    EXPECT_EQ((*d)["op"], "SUB");
}

TEST(DetectOverflow, SamePatternOutsideVulnLocs)
{
    EXPECT_FALSE(detect_overflow(step(OP_SUB, 9, {0, 1}), kCode, spec_at({8}), kU256));
    EXPECT_FALSE(detect_overflow(step(OP_SUB, 8, {0, 1}), Address::from_number(1), spec_at({8}), kU256));
}

TEST(DetectOverflow, InBoundsAddIsClean)
{
    EXPECT_FALSE(detect_overflow(step(OP_ADD, 8, {1, 2}), kCode, spec_at({8}), kU256));
}

TEST(DetectOverflow, BatchMultiplicationMatchesOracle)
{
    const Word256 half = Word256{1} << 255;
    const auto d = detect_overflow(step(OP_MUL, 8, {2, half}), kCode, spec_at({8}), kU256);
    ASSERT_TRUE(d);
    const auto oracle = evmioc::oracle::evaluate(IntOp::mul, 2, half, 0, kU256.min, kU256.max);
    EXPECT_EQ((*d)["zResult"].get<std::string>(), oracle.z.get_str());
    EXPECT_EQ((*d)["zResult"].get<std::string>(), evmioc::oracle::two_pow(256).get_str());
    EXPECT_EQ((*d)["result"], "0x0");
}

TEST(DetectOverflow, NonIntegerOpIgnored)
{
    EXPECT_FALSE(detect_overflow(step(OP_LT, 8, {0, 1}), kCode, spec_at({8}), kU256));
}

TEST(DetectDosRevert, CallReturningZero)
{
    EXPECT_TRUE(detect_dos_revert(call_step(OP_CALL, 5, 0), kCode, spec_at({5})));
    EXPECT_FALSE(detect_dos_revert(call_step(OP_CALL, 5, 1), kCode, spec_at({5})));
    EXPECT_FALSE(detect_dos_revert(call_step(OP_STATICCALL, 5, 0), kCode, spec_at({5})));
    EXPECT_FALSE(detect_dos_revert(call_step(OP_CALL, 6, 0), kCode, spec_at({5})));
}

TEST(DetectReentrancy, SameIdStrictlyBelow)
{
    const Address bank = kCode, attacker = Address::from_number(7);
    const TraceStep s = step(OP_SSTORE, 3, {1, 2});
    EXPECT_TRUE(detect_reentrancy(s, bank, {bank, attacker, bank}, spec_at({3})));
    EXPECT_FALSE(detect_reentrancy(s, bank, {bank}, spec_at({3})));
    EXPECT_FALSE(detect_reentrancy(s, bank, {attacker, bank}, spec_at({3})));
    EXPECT_FALSE(detect_reentrancy(step(OP_SSTORE, 4, {1, 2}), bank, {bank, attacker, bank}, spec_at({3})));
}

TEST(RuleRegistry, ConfigErrors)
{
    VulnSpec v = spec_at({1});
    v.params.clear();
    EXPECT_THROW((void)make_evm_rule("overflow", v), ConfigError);
    EXPECT_NO_THROW((void)make_evm_rule("dos", v));
    EXPECT_THROW((void)make_evm_rule("frontrunning", v), ConfigError);
    EXPECT_EQ(make_evm_rule("reentrancy", v)->id(), "reentrancy");
}

class ScenarioDetection : public ::testing::TestWithParam<std::string>
{
};

TEST_P(ScenarioDetection, DetectsExactlyTheLabeledExploits)
{
    const Fixture& f = scenario_fixture(GetParam());
    LocalBackend local(fixture_on_disk(GetParam()));
    const auto rule = make_evm_rule(f.vuln.evm_rule, f.vuln);
    const EvmRunResult r = run_evm_detector(f.feed, *rule, local);
    EXPECT_TRUE(r.skipped.empty());
    EXPECT_EQ(detected_hashes(r), exploit_hashes(f));
    for (const auto& d : r.detections)
    {
        EXPECT_TRUE(f.vuln.contains(d.code_address, d.pc));
        EXPECT_EQ(d.rule_id, f.vuln.evm_rule);
    }
}

TEST_P(ScenarioDetection, CustomTracerGivesTheSameDetections)
{
    const Fixture& f = scenario_fixture(GetParam());
    LocalBackend local(fixture_on_disk(GetParam()));
    const auto rule = make_evm_rule(f.vuln.evm_rule, f.vuln);
    const EvmRunResult full = run_evm_detector(f.feed, *rule, local);
    const EvmRunResult small = run_evm_detector(f.feed, *rule, local, EvmRunOptions{true});
    ASSERT_EQ(full.detections.size(), small.detections.size());
    for (std::size_t i = 0; i < full.detections.size(); ++i)
        EXPECT_EQ(full.detections[i].to_json(), small.detections[i].to_json());
    EXPECT_LE(small.steps_seen, full.steps_seen);
}

TEST_P(ScenarioDetection, TxOrderPermutationPermutesDetections)
{
    const Fixture& f = scenario_fixture(GetParam());
    LocalBackend local(fixture_on_disk(GetParam()));
    const auto rule = make_evm_rule(f.vuln.evm_rule, f.vuln);
    std::vector<TxRef> refs = external_refs(f);
    const EvmRunResult a = run_evm_detector(refs, *rule, local);
    std::reverse(refs.begin(), refs.end());
    const EvmRunResult b = run_evm_detector(refs, *rule, local);
    const auto dump = [](const EvmRunResult& r) {
        std::vector<std::string> v;
        for (const auto& d : r.detections)
            v.push_back(d.to_json().dump());
        std::sort(v.begin(), v.end());
        return v;
    };
    EXPECT_EQ(dump(a), dump(b));
}

INSTANTIATE_TEST_SUITE_P(AllScenarios, ScenarioDetection,
                         ::testing::Values("Bank", "DelayedUnderflow", "ProductVote", "SimulationBECToken",
                                           "SimulationKotET", "TargetUnderflow"));

TEST(RunEvmDetector, BankSixDetectedTransactions)
{
    const Fixture& f = scenario_fixture("Bank");
    LocalBackend local(fixture_on_disk("Bank"));
    const auto rule = make_evm_rule("reentrancy", f.vuln);
    const EvmRunResult r = run_evm_detector(f.feed, *rule, local);
    EXPECT_EQ(detected_hashes(r).size(), 6u);
}

TEST(RunEvmDetector, KotetFourFailedDetections)
{
    const Fixture& f = scenario_fixture("SimulationKotET");
    LocalBackend local(fixture_on_disk("SimulationKotET"));
    const auto rule = make_evm_rule("dos", f.vuln);
    const EvmRunResult r = run_evm_detector(f.feed, *rule, local);
    ASSERT_EQ(r.detections.size(), 4u);
    for (const auto& d : r.detections)
        EXPECT_EQ(d.tx_status(), "failed");
}

TEST(RunEvmDetector, RevertedUnderflowStillDetected)
{
    const Fixture& f = scenario_fixture("DelayedUnderflow");
    LocalBackend local(fixture_on_disk("DelayedUnderflow"));
    const auto rule = make_evm_rule("overflow", f.vuln);
    const EvmRunResult r = run_evm_detector(f.feed, *rule, local);
    std::size_t failed = 0;
    for (const auto& d : r.detections)
        failed += d.tx_failed ? 1 : 0;
    EXPECT_EQ(failed, 1u);
}

TEST(RunEvmDetector, EmptyListAndMissingTrace)
{
    const Fixture& f = scenario_fixture("TargetUnderflow");
    const auto copy = scratch_dir() / "gap-TargetUnderflow";
    std::filesystem::remove_all(copy);
    write_fixture(f, copy);
    LocalBackend local(copy);
    const auto rule = make_evm_rule("overflow", f.vuln);
    EXPECT_TRUE(run_evm_detector({}, *rule, local).detections.empty());

    const std::vector<TxRef> refs = external_refs(f);
    std::filesystem::remove(copy / "traces" / (refs.front().tx_hash.plain_hex() + ".json"));
    const EvmRunResult r = run_evm_detector(refs, *rule, local);
    ASSERT_EQ(r.skipped.size(), 1u);
    EXPECT_EQ(r.skipped[0].reason, "trace-unavailable");
    EXPECT_EQ(r.skipped[0].tx_hash, refs.front().tx_hash);
    EXPECT_EQ(r.detections.size(), refs.size() - 1);
}

TEST(RunEvmDetector, DetectionJsonFields)
{
    Detection d;
    d.rule_id = "dos";
    d.tx_failed = true;
    const Json j = d.to_json();
    for (const char* k : {"level", "ruleId", "txHash", "blockNumber", "txIndex", "pc", "frameDepth", "codeAddress",
                          "detail", "txStatus", "spec"})
        EXPECT_TRUE(j.contains(k)) << k;
    EXPECT_EQ(j["txStatus"], "failed");
}
