// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#include <evmioc/evmioc.hpp>

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <iostream>

namespace
{
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitArchiveGap = 3;

void write_or_print(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-")
        std::cout << text;
    else
        evmioc::detail::write_text(path, text);
}

std::vector<std::string> expand_scenarios(const std::string& s)
{
    if (s == "all")
        return evmioc::scenario_names();
    return {s};
}

evmioc::RpcServer* g_server = nullptr;

void stop_server(int)
{
    if (g_server != nullptr)
        g_server->stop();
}
}  // namespace

int main(int argc, char** argv)
{
    using namespace evmioc;
    CLI::App app{"Exploit forensics over EVM traces and archived block states"};
    app.require_subcommand(1);

    // generate
    std::string gen_scenario = "all", gen_out = "fixtures";
    std::uint64_t gen_seed = 1;
    auto* gen = app.add_subcommand("generate", "Build labeled fixture chains");
    gen->add_option("-s,--scenario", gen_scenario, "Scenario name or 'all'");
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("-o,--out", gen_out, "Output directory (one subdirectory per scenario)");

    // scale
    std::string sc_axis = "instructions", sc_out;
    std::uint64_t sc_mag = 0, sc_seed = 1;
    auto* sc = app.add_subcommand("scale", "Build one scaled fixture");
    sc->add_option("--axis", sc_axis, "instructions | storage")->required();
    sc->add_option("--magnitude", sc_mag, "Trace steps or storage entries")->required();
    sc->add_option("--seed", sc_seed, "Generator seed");
    sc->add_option("-o,--out", sc_out, "Output directory")->required();

    // investigate
    InvestigationConfig inv;
    std::vector<std::string> inv_shared;
    std::string inv_filter = "explorer", inv_explorer, inv_detector, inv_cache, inv_mode, inv_out, inv_labels;
    bool inv_table = false;
    auto* invc = app.add_subcommand("investigate", "Run one investigation and emit a JSON report");
    invc->add_option("-t,--tag", inv.tag, "Run label");
    invc->add_option("-p,--param", inv_shared, "Shared key=value parameter (repeatable)");
    invc->add_option("-f,--filter", inv_filter, "Filter switch, e.g. explorer[from=1,to=90,fs=[\"withdraw(uint256)\"]]");
    invc->add_option("-e,--explorer", inv_explorer, "Explorer switch, e.g. local[dir=fixtures/Bank]")->required();
    invc->add_option("-d,--detector", inv_detector, "Detector switch, e.g. evm[rule=reentrancy,vulns=Bank.json]")->required();
    invc->add_option("-c,--cache", inv_cache, "Cache directory");
    invc->add_option("-m,--mode", inv_mode, "local | cached | customTracer (default: cached with -c, else local)");
    invc->add_option("-o,--out", inv_out, "Report path ('-' for stdout)");
    invc->add_option("--labels", inv_labels, "Label store to score the report against");
    invc->add_flag("--table", inv_table, "Print the plain-text summary instead of JSON");

    // evaluate
    std::string ev_fixtures = "fixtures", ev_scenario = "all", ev_level = "evm", ev_mode = "local", ev_cache;
    auto* ev = app.add_subcommand("evaluate", "Run the canonical investigation of generated fixtures and score it");
    ev->add_option("--fixtures", ev_fixtures, "Directory produced by 'generate'");
    ev->add_option("-s,--scenario", ev_scenario, "Scenario name or 'all'");
    ev->add_option("--level", ev_level, "evm | block");
    ev->add_option("-m,--mode", ev_mode, "local | cached | customTracer");
    ev->add_option("-c,--cache", ev_cache, "Cache directory (cached mode)");

    // bench
    BenchOptions bo;
    std::string bo_mode = "local", bo_out;
    auto* be = app.add_subcommand("bench", "Time the detectors over scaled fixtures (CSV)");
    be->add_option("--axis", bo.axis, "instructions | storage");
    be->add_option("--magnitudes", bo.magnitudes, "Comma-separated magnitudes")->delimiter(',')->required();
    be->add_option("-m,--mode", bo_mode, "local | cached | customTracer");
    be->add_option("--level", bo.level, "evm | block");
    be->add_option("--workdir", bo.workdir, "Scratch directory for scaled fixtures")->required();
    be->add_option("--reps", bo.reps, "Timed repetitions per magnitude (median reported)");
    be->add_option("-o,--out", bo_out, "CSV path ('-' for stdout)");

    // serve
    std::string sv_fixture, sv_host = "127.0.0.1";
    int sv_port = 8545;
    auto* sv = app.add_subcommand("serve", "Serve a fixture over JSON-RPC");
    sv->add_option("--fixture", sv_fixture, "Fixture directory")->required();
    sv->add_option("--host", sv_host, "Bind address");
    sv->add_option("--port", sv_port, "Port");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        (void)app.exit(e);
        return kExitConfig;
    }

    try
    {
        if (*gen)
        {
            for (const auto& name : expand_scenarios(gen_scenario))
            {
                const Fixture f = build_fixture_chain(name, gen_seed);
                const auto dir = std::filesystem::path(gen_out) / name;
                std::filesystem::remove_all(dir);
                write_fixture(f, dir);
                std::size_t exploits = 0;
                for (const auto& [h, l] : f.labels)
                    exploits += l.exploit() ? 1 : 0;
                std::printf("%-20s blocks %3llu  txs %3zu  exploits %2zu  -> %s\n", name.c_str(),
                            static_cast<unsigned long long>(f.node.height()), f.labels.size(), exploits, dir.c_str());
            }
        }
        else if (*sc)
        {
            const std::string base = sc_axis == "storage" ? "TargetUnderflow" : "DelayedUnderflow";
            const Fixture f = scale_fixture(base, sc_axis, sc_mag, sc_seed);
            std::filesystem::remove_all(sc_out);
            write_fixture(f, sc_out);
            std::printf("%s axis %s magnitude %llu -> %s\n", base.c_str(), sc_axis.c_str(),
                        static_cast<unsigned long long>(sc_mag), sc_out.c_str());
        }
        else if (*invc)
        {
            for (const auto& kv : inv_shared)
                inv.shared.insert(parse_shared_param(kv));
            inv.filter = parse_component(inv_filter);
            inv.explorer = parse_component(inv_explorer);
            inv.detector = parse_component(inv_detector);
            if (!inv_cache.empty())
                inv.cache_dir = inv_cache;
            inv.mode = inv_mode.empty() ? (inv.cache_dir ? Mode::cached : Mode::local) : parse_mode(inv_mode);
            const Report rep = run_investigation(inv);
            Json j = rep.to_json();
            if (!inv_labels.empty())
                j["score"] = score(rep, labels_from_json(detail::read_json(inv_labels))).to_json();
            write_or_print(inv_out, inv_table ? rep.summary_table() : j.dump(2) + "\n");
        }
        else if (*ev)
        {
            std::printf("%-20s %-6s %6s %4s %4s %4s\n", "scenario", "level", "labels", "TP", "FP", "FN");
            for (const auto& name : expand_scenarios(ev_scenario))
            {
                const auto dir = std::filesystem::path(ev_fixtures) / name;
                std::optional<std::filesystem::path> cache;
                if (!ev_cache.empty())
                    cache = std::filesystem::path(ev_cache) / name;
                const Report rep = run_investigation(fixture_config(dir, ev_level, parse_mode(ev_mode), cache));
                const LoadedFixture lf = load_fixture(dir);
                const Score s = score(rep, lf.labels);
                std::printf("%-20s %-6s %6zu %4zu %4zu %4zu\n", name.c_str(), ev_level.c_str(), s.labels, s.tp, s.fp, s.fn);
            }
        }
        else if (*be)
        {
            bo.mode = parse_mode(bo_mode);
            write_or_print(bo_out, bench_csv(bench(bo)));
        }
        else if (*sv)
        {
            RpcServer server(sv_fixture);
            g_server = &server;
            std::signal(SIGINT, stop_server);
            std::signal(SIGTERM, stop_server);
            std::printf("serving %s on http://%s:%d\n", sv_fixture.c_str(), sv_host.c_str(), sv_port);
            std::fflush(stdout);
            server.listen(sv_host, sv_port);
            g_server = nullptr;
        }
        return kExitOk;
    }
    catch (const ArchiveGapError& e)
    {
        std::fprintf(stderr, "archive gap: %s\n", e.what());
        return kExitArchiveGap;
    }
    catch (const ProtocolError& e)
    {
        std::fprintf(stderr, "archive protocol error: %s\n", e.what());
        return kExitArchiveGap;
    }
    catch (const std::exception& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
}
