// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "evmioc/fixtures.hpp"
#include "evmioc/interpreter.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace evmioc::testing
{
/// Live interpreter state captured before each instruction.
struct ObservedStep
{
    std::vector<Address> frame_ids;  ///< outermost first
    std::uint64_t pc = 0;
    std::uint32_t depth = 0;
    std::vector<Word256> stack;
};

struct ReplayedTx
{
    std::uint64_t block_number = 0;
    std::size_t index = 0;
    const Transaction* tx = nullptr;
    const GlobalState* pre = nullptr;
    const ExecutionOutcome* outcome = nullptr;
    const std::vector<ObservedStep>* observed = nullptr;
};

/// Re-executes every transaction of the fixture from genesis, observing the interpreter's own
/// activation stack at each step.
inline void replay_observed(const Fixture& f, const std::function<void(const ReplayedTx&)>& visit)
{
    GlobalState sigma = f.node.state(f.node.block(0).state_root);
    for (std::uint64_t n = 1; n <= f.node.height(); ++n)
    {
        const Block& b = f.node.block(n);
        for (std::size_t i = 0; i < b.txs.size(); ++i)
        {
            std::vector<ObservedStep> observed;
            const auto obs = [&](const EvmState& st) {
                ObservedStep o;
                for (const auto& ar : st.activations.frames)
                    o.frame_ids.push_back(ar.id);
                o.pc = st.activations.top().pc;
                o.depth = static_cast<std::uint32_t>(st.activations.frames.size());
                o.stack = st.activations.top().stack;
                observed.push_back(std::move(o));
            };
            ExecutionOutcome out = execute_transaction(sigma, b.txs[i], kDefaultTxGas, obs);
            visit(ReplayedTx{n, i, &b.txs[i], &sigma, &out, &observed});
            sigma = std::move(out.final_state);
        }
    }
}

/// One fixture per scenario at the default seed, built once per test binary.
inline const Fixture& scenario_fixture(const std::string& name)
{
    static std::map<std::string, Fixture> cache;
    auto it = cache.find(name);
    if (it == cache.end())
        it = cache.emplace(name, build_fixture_chain(name, 1)).first;
    return it->second;
}

/// Per-process scratch directory, removed at exit.
inline const std::filesystem::path& scratch_dir()
{
    struct Dir
    {
        std::filesystem::path path;
        Dir()
        {
            path = std::filesystem::temp_directory_path() /
                   ("evmioc-test-" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
            std::filesystem::create_directories(path);
        }
        ~Dir()
        {
            std::error_code ec;
            std::filesystem::remove_all(path, ec);
        }
    };
    static Dir dir;
    return dir.path;
}

/// A loopback TCP port that had no listener when this returned.
inline int closed_port()
{
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    socklen_t len = sizeof addr;
    if (fd < 0 || ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0)
        throw std::runtime_error("cannot reserve a loopback port");
    ::close(fd);
    return ntohs(addr.sin_port);
}

/// The scenario fixture written to disk once per test binary.
inline std::filesystem::path fixture_on_disk(const std::string& name)
{
    const auto dir = scratch_dir() / "fixtures" / name;
    if (!std::filesystem::exists(dir / "chain.json"))
        write_fixture(scenario_fixture(name), dir);
    return dir;
}
}  // namespace evmioc::testing
