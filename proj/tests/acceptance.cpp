// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one PASS/FAIL line per criterion; exits non-zero if any fails.

#include "evmioc/orchestrator.hpp"
#include "oracle/bigint_oracle.hpp"
#include "support/fixture_replay.hpp"
#include "support/random_words.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>

using namespace evmioc;
using evmioc::testing::fixture_on_disk;
using evmioc::testing::replay_observed;
using evmioc::testing::ReplayedTx;
using evmioc::testing::scenario_fixture;
using evmioc::testing::scratch_dir;

namespace
{
struct Outcome
{
    bool pass = false;
    std::string detail;
};

double since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

const std::map<std::string, std::size_t> kExploitCounts = {
    {"Bank", 6}, {"DelayedUnderflow", 11}, {"ProductVote", 20}, {"SimulationBECToken", 12}, {"SimulationKotET", 4},
    {"TargetUnderflow", 20}};

Outcome evm_accuracy()
{
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::ostringstream d;
    for (const auto& [name, count] : kExploitCounts)
    {
        const Fixture& f = scenario_fixture(name);
        const Report rep = run_investigation(fixture_config(fixture_on_disk(name), "evm", Mode::local));
        const Score s = score(rep, f.labels);
        const bool good = s.labels == count && s.tp == count && s.fp == 0 && s.fn == 0;
        ok = ok && good;
        d << name << " " << s.tp << "/" << s.labels << " fp " << s.fp << " fn " << s.fn << "; ";
    }
    const double secs = since(t0);
    ok = ok && secs < 60;
    d << fmt("%.1fs", secs);
    return {ok, d.str()};
}

Outcome block_mechanisms()
{
    bool ok = true;
    std::ostringstream d;
    for (const auto& [name, count] : kExploitCounts)
    {
        const Fixture& f = scenario_fixture(name);
        const Score s = score(run_investigation(fixture_config(fixture_on_disk(name), "block", Mode::local)), f.labels);
        ok = ok && s.fp == 0;
        if (name != "SimulationBECToken")
            continue;
        std::size_t internal = 0, occluded = 0;
        for (const auto& h : s.missed)
        {
            const std::string& mech = f.labels.at(h).mechanism;
            internal += mech.find("internal call") != std::string::npos;
            occluded += mech.find("same block") != std::string::npos;
        }
        ok = ok && s.fn == 4 && internal == 3 && occluded == 1;
        d << "BEC fn " << s.fn << " (internal " << internal << ", occluded " << occluded << "); ";
    }
    d << "fp 0 on all scenarios: " << (ok ? "yes" : "see counts");
    return {ok, d.str()};
}

Outcome no_replay()
{
    for (const auto& [name, count] : kExploitCounts)
        (void)fixture_on_disk(name);
    const auto before = interpreter_step_counter().load();
    std::size_t blocks = 0, lookups = 0;
    for (const auto& [name, count] : kExploitCounts)
    {
        const Report rep = run_investigation(fixture_config(fixture_on_disk(name), "block", Mode::local));
        blocks += rep.analyzed;
        lookups += rep.explorer_calls;
    }
    const auto steps = interpreter_step_counter().load() - before;
    return {steps == 0 && blocks > 0,
            "interpreter steps " + std::to_string(steps) + " over " + std::to_string(blocks) + " blocks, " +
                std::to_string(lookups) + " archive lookups"};
}

Outcome performance()
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto work = scratch_dir() / "acceptance-bench";
    const std::vector<std::uint64_t> steps_axis = {21000, 42000, 84000, 168000, 336000};
    const std::vector<std::uint64_t> storage_axis = {500, 2000, 8000, 32000};

    BenchOptions o;
    o.workdir = work;
    o.reps = 5;
    o.axis = "instructions";
    o.magnitudes = steps_axis;
    o.level = "evm";
    const auto evm = bench(o);
    o.level = "block";
    const auto blk = bench(o);
    o.axis = "storage";
    o.magnitudes = storage_axis;
    const auto uncached = bench(o);
    o.mode = Mode::cached;
    const auto cached = bench(o);

    std::vector<double> x, y;
    for (const auto& r : evm)
    {
        x.push_back(static_cast<double>(r.steps));
        y.push_back(r.seconds);
    }
    const double r2 = linear_r2(x, y);
    double lo = blk.front().seconds, hi = lo;
    for (const auto& r : blk)
    {
        lo = std::min(lo, r.seconds);
        hi = std::max(hi, r.seconds);
    }
    const double spread = lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
    bool monotone = true, cheaper = true;
    for (std::size_t i = 0; i < uncached.size(); ++i)
    {
        if (i > 0)
            monotone = monotone && uncached[i].seconds > uncached[i - 1].seconds;
        cheaper = cheaper && cached[i].seconds < uncached[i].seconds;
    }
    const double secs = since(t0);
    std::ostringstream d;
    d << "evm R^2 " << fmt("%.4f", r2) << ", block spread " << fmt("%.2fx", spread) << ", storage uncached monotone "
      << (monotone ? "yes" : "no") << ", cached lower " << (cheaper ? "yes" : "no") << "; " << fmt("%.1fs", secs);
    return {r2 >= 0.95 && spread < 3 && monotone && cheaper && secs < 600, d.str()};
}

Outcome oracle_equivalence()
{
    std::size_t steps = 0, mismatches = 0, txs = 0;
    bool roots = true;
    for (const auto& [name, count] : kExploitCounts)
    {
        const Fixture& f = scenario_fixture(name);
        replay_observed(f, [&](const ReplayedTx& t) {
            ++txs;
            const TraceDocument doc =
                parse_struct_logs(serialize_trace(TraceDocument{t.outcome->summary(), t.outcome->trace}));
            const Reconstruction r = reconstruct(doc, *t.tx, t.pre);
            if (r.steps.size() != t.observed->size())
            {
                mismatches += std::max(r.steps.size(), t.observed->size());
                return;
            }
            for (std::size_t k = 0; k < r.steps.size(); ++k)
            {
                const auto& o = (*t.observed)[k];
                const auto& s = r.steps[k];
                ++steps;
                if (r.frame_ids(s) != o.frame_ids || s->pc != o.pc || s->depth != o.depth || s->stack != o.stack)
                    ++mismatches;
            }
        });
        roots = roots && !first_replay_mismatch(f.node);
    }
    return {mismatches == 0 && steps > 0 && roots, std::to_string(txs) + " txs, " + std::to_string(steps) +
                                                       " steps, mismatches " + std::to_string(mismatches) +
                                                       ", state roots " + (roots ? "reproduced" : "differ")};
}

Outcome arithmetic_oracle()
{
    constexpr int kCases = 10000;
    const std::vector<IntTypeBounds> bounds = {IntTypeBounds::unsigned_bits(256), IntTypeBounds::unsigned_bits(8),
                                               IntTypeBounds::unsigned_bits(64),  IntTypeBounds::signed_bits(256),
                                               IntTypeBounds::signed_bits(8),     IntTypeBounds::signed_bits(128)};
    bool ok = true;
    std::ostringstream d;
    for (IntOp op : {IntOp::add, IntOp::mul, IntOp::sub, IntOp::sdiv, IntOp::addmod, IntOp::mulmod, IntOp::exp})
    {
        std::mt19937_64 rng{0xacce97u + static_cast<unsigned>(op)};
        int bad = 0;
        for (int i = 0; i < kCases; ++i)
        {
            const auto& b = bounds[static_cast<std::size_t>(i) % bounds.size()];
            const Word256 a = test::random_word(rng);
            const Word256 c = op == IntOp::exp ? test::random_exponent(rng) : test::random_word(rng);
            const Word256 n = test::random_word(rng);
            std::vector<Word256> operands{a, c};
            if (arity(op) == 3)
                operands.push_back(n);
            const ArithResult got = wrap_arith(op, operands, b);
            const auto want = oracle::evaluate(op, a, c, n, b.min, b.max);
            if (oracle::to_mpz(got.result) != want.result || got.out_of_bounds != want.out_of_bounds)
                ++bad;
        }
        ok = ok && bad == 0;
        d << to_string(op) << " " << (kCases - bad) << "/" << kCases << " ";
    }
    return {ok, d.str()};
}

Outcome mode_invariance()
{
    bool identical = true, once = true;
    std::size_t misses = 0, entries = 0;
    for (const auto& [name, count] : kExploitCounts)
    {
        const auto dir = fixture_on_disk(name);
        for (const std::string level : {"evm", "block"})
        {
            const std::string local = run_investigation(fixture_config(dir, level, Mode::local)).results_json().dump();
            const auto cache = scratch_dir() / ("acceptance-cache-" + name + "-" + level);
            std::filesystem::remove_all(cache);
            const Report first = run_investigation(fixture_config(dir, level, Mode::cached, cache));
            const Report second = run_investigation(fixture_config(dir, level, Mode::cached, cache));
            identical = identical && first.results_json().dump() == local && second.results_json().dump() == local;
            if (level == "evm")
                identical = identical &&
                            run_investigation(fixture_config(dir, level, Mode::custom_tracer)).results_json().dump() == local;
            std::size_t files = 0;
            for (const auto& e : std::filesystem::directory_iterator(cache))
                files += e.path().filename().string().ends_with(".meta.json") ? 0 : 1;
            // Every miss stores one entry under its own key, so misses == entries means no query was fetched twice.
            once = once && first.cache_misses == files && second.cache_misses == 0;
            misses += first.cache_misses.value_or(0);
            entries += files;
        }
    }
    return {identical && once, std::string("results ") + (identical ? "byte-identical" : "differ") + ", inner fetches " +
                                   std::to_string(misses) + " for " + std::to_string(entries) +
                                   " distinct queries, repeat run 0 fetches: " + (once ? "yes" : "no")};
}

Outcome failed_exploit()
{
    const Fixture& f = scenario_fixture("DelayedUnderflow");
    const auto dir = fixture_on_disk("DelayedUnderflow");
    const Report evm = run_investigation(fixture_config(dir, "evm", Mode::local));
    const Report blk = run_investigation(fixture_config(dir, "block", Mode::local));
    std::vector<Hash32> failed;
    for (const auto& d : evm.detections)
        if (d.to_json()["txStatus"] == "failed" && f.labels.at(d.tx_hash).exploit())
            failed.push_back(d.tx_hash);
    const auto flagged = blk.flagged_txs();
    bool unflagged = !failed.empty();
    for (const auto& h : failed)
        unflagged = unflagged && !flagged.contains(h);
    return {failed.size() == 1 && unflagged, std::to_string(failed.size()) +
                                                 " failed exploit detected with txStatus=failed, block level flags it: " +
                                                 (unflagged ? "no" : "yes")};
}
}  // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"EVM-level detection accuracy", evm_accuracy},
        {"block-level false-negative mechanisms", block_mechanisms},
        {"block level executes no instructions", no_replay},
        {"performance shape", performance},
        {"trace reconstruction and chain replay", oracle_equivalence},
        {"arithmetic oracle agreement", arithmetic_oracle},
        {"mode invariance", mode_invariance},
        {"failed exploit handling", failed_exploit},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i)
    {
        Outcome o;
        try
        {
            o = criteria[i].second();
        }
        catch (const std::exception& e)
        {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("criterion %zu %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
