// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "explorer.hpp"
#include "filters.hpp"
#include "fixtures.hpp"
#include "ioc_block.hpp"
#include "ioc_evm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace evmioc
{
// --- component switch grammar ------------------------------------------------------------------
//
//   component := name [ '[' param { ',' param } ']' ]
//   param     := key '=' value
//   value     := list | quoted | bare
//   list      := '[' [ value { ',' value } ] ']'
//   quoted    := '"' { char | '\"' | '\\' } '"'
//   bare      := one or more chars other than , [ ] "
//
// Whitespace around tokens is ignored. A key may appear once.

struct ComponentSpec
{
    std::string name;
    std::map<std::string, Json> params;  ///< string or array of strings

    bool has(const std::string& key) const { return params.contains(key); }

    std::string get(const std::string& key, const std::string& fallback = {}) const
    {
        const auto it = params.find(key);
        if (it == params.end())
            return fallback;
        if (!it->second.is_string())
            throw ConfigError("parameter '" + key + "' of '" + name + "' must be a single value");
        return it->second.get<std::string>();
    }

    std::vector<std::string> list(const std::string& key) const
    {
        const auto it = params.find(key);
        if (it == params.end())
            return {};
        if (it->second.is_string())
            return {it->second.get<std::string>()};
        return it->second.get<std::vector<std::string>>();
    }

    Json to_json() const
    {
        Json p = Json::object();
        for (const auto& [k, v] : params)
            p[k] = v;
        return {{"name", name}, {"params", p}};
    }
};

namespace detail
{
class SwitchParser
{
public:
    explicit SwitchParser(std::string_view text) : s_(text) {}

    ComponentSpec parse()
    {
        ComponentSpec c;
        skip_ws();
        c.name = bare();
        if (c.name.empty())
            fail("expected a component name");
        skip_ws();
        if (peek() == '[')
        {
            ++i_;
            skip_ws();
            if (peek() != ']')
                for (;;)
                {
                    skip_ws();
                    std::string key = bare("=");
                    if (key.empty())
                        fail("expected a parameter name");
                    skip_ws();
                    expect('=');
                    Json value = this->value();
                    if (!c.params.emplace(key, std::move(value)).second)
                        fail("parameter '" + key + "' given twice");
                    skip_ws();
                    if (peek() == ',')
                    {
                        ++i_;
                        continue;
                    }
                    break;
                }
            expect(']');
        }
        skip_ws();
        if (i_ != s_.size())
            fail("unexpected trailing input");
        return c;
    }

private:
    Json value()
    {
        skip_ws();
        if (peek() == '[')
        {
            ++i_;
            Json arr = Json::array();
            skip_ws();
            if (peek() != ']')
                for (;;)
                {
                    Json v = value();
                    if (!v.is_string())
                        fail("nested lists are not supported");
                    arr.push_back(std::move(v));
                    skip_ws();
                    if (peek() == ',')
                    {
                        ++i_;
                        continue;
                    }
                    break;
                }
            expect(']');
            return arr;
        }
        if (peek() == '"')
        {
            ++i_;
            std::string out;
            while (i_ < s_.size() && s_[i_] != '"')
            {
                if (s_[i_] == '\\' && i_ + 1 < s_.size())
                    ++i_;
                out += s_[i_++];
            }
            expect('"');
            return out;
        }
        std::string v = bare();
        if (v.empty())
            fail("expected a value");
        return v;
    }

    std::string bare(std::string_view extra_stops = {})
    {
        std::string out;
        while (i_ < s_.size())
        {
            const char ch = s_[i_];
            if (ch == ',' || ch == '[' || ch == ']' || ch == '"' || extra_stops.find(ch) != std::string_view::npos)
                break;
            out += ch;
            ++i_;
        }
        while (!out.empty() && (out.back() == ' ' || out.back() == '\t'))
            out.pop_back();
        return out;
    }

    char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }
    void skip_ws()
    {
        while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t'))
            ++i_;
    }
    void expect(char c)
    {
        if (peek() != c)
            fail(std::string("expected '") + c + "'");
        ++i_;
    }
    [[noreturn]] void fail(const std::string& why) const
    {
        throw ConfigError("component switch '" + std::string(s_) + "' at offset " + std::to_string(i_) + ": " + why);
    }

    std::string_view s_;
    std::size_t i_ = 0;
};
}  // namespace detail

inline ComponentSpec parse_component(std::string_view text) { return detail::SwitchParser(text).parse(); }

/// Splits "key=value" shared parameters.
inline std::pair<std::string, std::string> parse_shared_param(std::string_view kv)
{
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw ConfigError("shared parameter '" + std::string(kv) + "' is not key=value");
    return {std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1))};
}

/// Accepts a canonical signature ("withdraw(uint256)") or a 4-byte hex selector.
inline Selector parse_selector(const std::string& s)
{
    if (s.find('(') != std::string::npos)
        return function_selector(s);
    try
    {
        return Selector::from_hex(s);
    }
    catch (const ParseError& e)
    {
        throw ConfigError("function selector '" + s + "': " + e.what());
    }
}

// --- configuration --------------------------------------------------------------------------

enum class Mode
{
    local,
    cached,
    custom_tracer,
};

inline std::string to_string(Mode m)
{
    switch (m)
    {
    case Mode::local:
        return "local";
    case Mode::cached:
        return "cached";
    case Mode::custom_tracer:
        return "customTracer";
    }
    return "?";
}

inline Mode parse_mode(const std::string& s)
{
    if (s == "local")
        return Mode::local;
    if (s == "cached")
        return Mode::cached;
    if (s == "customTracer")
        return Mode::custom_tracer;
    throw ConfigError("unknown mode '" + s + "' (local | cached | customTracer)");
}

/// filter:   explorer[from=,to=,fs=[...],internal=true|false]  or  csv[path=,from=,to=,fs=[...],internal=]
/// explorer: local[dir=]  or  rpc[provider=,retries=]
/// detector: evm[rule=,vulns=]  or  block[rule=,vulns=]
struct InvestigationConfig
{
    std::string tag;
    std::map<std::string, std::string> shared;
    ComponentSpec filter{"explorer", {}};
    ComponentSpec explorer;
    ComponentSpec detector;
    std::optional<std::filesystem::path> cache_dir;
    Mode mode = Mode::local;

    std::string level() const { return detector.name; }

    Json to_json() const
    {
        Json s = Json::object();
        for (const auto& [k, v] : shared)
            s[k] = v;
        return {{"tag", tag},
                {"shared", s},
                {"filter", filter.to_json()},
                {"explorer", explorer.to_json()},
                {"detector", detector.to_json()},
                {"cacheDir", cache_dir ? Json(cache_dir->string()) : Json(nullptr)},
                {"mode", to_string(mode)}};
    }

    void validate() const
    {
        if (detector.name != "evm" && detector.name != "block")
            throw ConfigError("detector must be 'evm' or 'block', not '" + detector.name + "'");
        if (explorer.name != "local" && explorer.name != "rpc")
            throw ConfigError("explorer must be 'local' or 'rpc', not '" + explorer.name + "'");
        if (filter.name != "explorer" && filter.name != "csv")
            throw ConfigError("filter must be 'explorer' or 'csv', not '" + filter.name + "'");
        if (mode == Mode::custom_tracer && detector.name != "evm")
            throw ConfigError("customTracer mode requires the evm detector");
        if (mode == Mode::cached && !cache_dir)
            throw ConfigError("cached mode requires a cache directory");
        if (!detector.has("vulns"))
            throw ConfigError("detector needs a vulns=<spec.json> parameter");
    }
};

struct Timing
{
    double filter = 0, fetch = 0, analyze = 0, total = 0;

    Json to_json() const
    {
        return {{"filterSeconds", filter}, {"fetchSeconds", fetch}, {"analyzeSeconds", analyze}, {"totalSeconds", total}};
    }
};

struct Report
{
    Json config;
    FilterQuery query;
    std::size_t transactions = 0;
    std::size_t analyzed = 0;
    std::vector<Detection> detections;
    std::vector<BlockDetection> block_detections;
    std::vector<SkipRecord> skipped;
    Timing timing;
    std::uint64_t explorer_calls = 0;
    std::optional<std::uint64_t> cache_misses;  ///< set when a cache is in use

    /// Everything except timing and call counts; equal across modes on the same inputs.
    Json results_json() const
    {
        Json d = Json::array(), b = Json::array(), s = Json::array();
        for (const auto& x : detections)
            d.push_back(x.to_json());
        for (const auto& x : block_detections)
            b.push_back(x.to_json());
        for (const auto& x : skipped)
            s.push_back(x.to_json());
        return {{"detections", d}, {"blockDetections", b}, {"skipped", s}};
    }

    Json to_json() const
    {
        Json j = results_json();
        j["config"] = config;
        j["query"] = query.to_json();
        j["timing"] = timing.to_json();
        j["explorerCalls"] = explorer_calls;
        j["cacheMisses"] = cache_misses ? Json(*cache_misses) : Json(nullptr);
        j["totals"] = {{"transactions", transactions},
                       {"analyzed", analyzed},
                       {"detections", detections.size()},
                       {"blockDetections", block_detections.size()},
                       {"skipped", skipped.size()}};
        return j;
    }

    /// Exploit transactions reported: tx hashes of EVM detections, candidates of block detections.
    std::set<Hash32> flagged_txs() const
    {
        std::set<Hash32> out;
        for (const auto& d : detections)
            out.insert(d.tx_hash);
        for (const auto& b : block_detections)
            out.insert(b.candidates.begin(), b.candidates.end());
        return out;
    }

    std::string summary_table() const
    {
        std::string out = "level  rule        block  index  pc     status   tx\n";
        char line[256];
        for (const auto& d : detections)
        {
            std::snprintf(line, sizeof line, "evm    %-10s  %5llu  %5llu  %5llu  %-7s  %s\n", d.rule_id.c_str(),
                          static_cast<unsigned long long>(d.block_number), static_cast<unsigned long long>(d.tx_index),
                          static_cast<unsigned long long>(d.pc), d.tx_status().c_str(), d.tx_hash.hex().c_str());
            out += line;
        }
        for (const auto& b : block_detections)
            for (const auto& h : b.candidates)
            {
                std::snprintf(line, sizeof line, "block  %-10s  %5llu  %5s  %5s  %-7s  %s\n", b.rule_id.c_str(),
                              static_cast<unsigned long long>(b.block_number), "-", "-", "-", h.hex().c_str());
                out += line;
            }
        std::snprintf(line, sizeof line,
                      "transactions %zu, analyzed %zu, detections %zu, flagged blocks %zu, skipped %zu\n"
                      "filter %.3fs, fetch %.3fs, analyze %.3fs\n",
                      transactions, analyzed, detections.size(), block_detections.size(), skipped.size(), timing.filter,
                      timing.fetch, timing.analyze);
        out += line;
        return out;
    }
};

namespace detail
{
inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::uint64_t param_number(const ComponentSpec& c, const std::string& key, std::uint64_t fallback)
{
    if (!c.has(key))
        return fallback;
    try
    {
        return static_cast<std::uint64_t>(parse_decimal_or_hex(c.get(key)));
    }
    catch (const std::exception&)
    {
        throw ConfigError("parameter '" + key + "' of '" + c.name + "' must be a block number");
    }
}

inline bool param_bool(const ComponentSpec& c, const std::string& key, bool fallback)
{
    if (!c.has(key))
        return fallback;
    const std::string v = c.get(key);
    if (v == "true" || v == "1")
        return true;
    if (v == "false" || v == "0")
        return false;
    throw ConfigError("parameter '" + key + "' of '" + c.name + "' must be true or false");
}
}  // namespace detail

/// Builds the backend named by an explorer switch.
inline std::unique_ptr<Explorer> make_backend(const ComponentSpec& e)
{
    if (e.name == "local")
    {
        const std::filesystem::path dir = e.get("dir");
        if (dir.empty() || !std::filesystem::is_directory(dir))
            throw ConfigError("local explorer needs dir=<fixture directory>; '" + dir.string() + "' is not a directory");
        return std::make_unique<LocalBackend>(dir);
    }
    if (e.name == "rpc")
    {
        const std::string url = e.get("provider");
        if (url.empty())
            throw ConfigError("rpc explorer needs provider=<url>");
        RpcOptions opt;
        opt.retries = static_cast<int>(detail::param_number(e, "retries", 3));
        return std::make_unique<RpcBackend>(url, opt);
    }
    throw ConfigError("unknown explorer '" + e.name + "'");
}

/// The loaded components of an investigation.
struct Pipeline
{
    std::unique_ptr<Explorer> backend;
    std::unique_ptr<CachedExplorer> cache;
    std::unique_ptr<TimedExplorer> timed;
    VulnSpec spec;
    FilterQuery query;
    std::optional<std::vector<TxRef>> feed;

    Explorer& explorer() { return *timed; }
};

inline Pipeline load_pipeline(const InvestigationConfig& cfg)
{
    cfg.validate();
    Pipeline p;
    p.spec = VulnSpec::load(cfg.detector.get("vulns"));
    p.backend = make_backend(cfg.explorer);
    Explorer* top = p.backend.get();
    if (cfg.cache_dir)
    {
        p.cache = std::make_unique<CachedExplorer>(*top, *cfg.cache_dir);
        top = p.cache.get();
    }
    p.timed = std::make_unique<TimedExplorer>(*top);

    FilterQuery& q = p.query;
    const auto target = cfg.shared.contains("address") ? cfg.shared.at("address")
                        : cfg.shared.contains("contract") ? cfg.shared.at("contract")
                                                          : p.spec.contract.hex();
    try
    {
        q.target = Address::from_hex(target);
    }
    catch (const ParseError& e)
    {
        throw ConfigError("target address '" + target + "': " + e.what());
    }
    for (const auto& s : cfg.filter.list("fs"))
        q.selectors.insert(parse_selector(s));
    q.include_internal = detail::param_bool(cfg.filter, "internal", true);
    q.from = detail::param_number(cfg.filter, "from", 1);
    if (cfg.filter.name == "csv")
    {
        const std::string path = cfg.filter.get("path");
        if (path.empty())
            throw ConfigError("csv filter needs path=<feed.csv>");
        p.feed = parse_csv_feed(path);
        std::uint64_t last = 0;
        for (const auto& r : *p.feed)
            last = std::max(last, r.block_number);
        q.to = detail::param_number(cfg.filter, "to", last);
    }
    else
        q.to = cfg.filter.has("to") ? detail::param_number(cfg.filter, "to", 0) : p.timed->block_number();
    q.validate();
    return p;
}

/// Load components, list transactions, run the detector, assemble the report.
inline Report run_investigation(const InvestigationConfig& cfg)
{
    const auto t_total = std::chrono::steady_clock::now();
    Pipeline p = load_pipeline(cfg);
    Report rep;
    rep.config = cfg.to_json();
    rep.query = p.query;

    auto t0 = std::chrono::steady_clock::now();
    const std::vector<TxRef> txs = p.feed ? tx_list(*p.feed, p.query) : tx_list(p.explorer(), p.query);
    rep.timing.filter = detail::seconds_since(t0);
    rep.transactions = txs.size();

    const std::string rule_id = cfg.detector.get("rule", cfg.level() == "evm" ? p.spec.evm_rule
                                                                               : (p.spec.block ? p.spec.block->rule : ""));
    p.timed->reset();
    t0 = std::chrono::steady_clock::now();
    if (cfg.level() == "evm")
    {
        const auto rule = make_evm_rule(rule_id, p.spec);
        EvmRunResult r = run_evm_detector(txs, *rule, p.explorer(), EvmRunOptions{cfg.mode == Mode::custom_tracer});
        rep.detections = std::move(r.detections);
        rep.skipped = std::move(r.skipped);
        rep.analyzed = r.analyzed;
    }
    else
    {
        const auto rule = make_block_rule(rule_id, p.spec);
        BlockRunResult r = run_block_detector(txs, *rule, p.explorer());
        rep.block_detections = std::move(r.detections);
        rep.skipped = std::move(r.skipped);
        rep.analyzed = r.blocks_analyzed;
    }
    const double detect = detail::seconds_since(t0);
    rep.timing.fetch = std::min(detect, p.timed->seconds());
    rep.timing.analyze = detect - rep.timing.fetch;
    rep.explorer_calls = p.cache ? p.cache->inner_calls() : p.timed->calls();
    if (p.cache)
        rep.cache_misses = p.cache->misses();
    rep.timing.total = detail::seconds_since(t_total);
    return rep;
}

// --- scoring against a label store -----------------------------------------------------------

struct Score
{
    std::size_t labels = 0, tp = 0, fp = 0, fn = 0;
    std::vector<Hash32> missed;
    std::vector<Hash32> false_alarms;

    Json to_json() const
    {
        Json m = Json::array(), f = Json::array();
        for (const auto& h : missed)
            m.push_back(h.hex());
        for (const auto& h : false_alarms)
            f.push_back(h.hex());
        return {{"labels", labels}, {"tp", tp}, {"fp", fp}, {"fn", fn}, {"missed", m}, {"falseAlarms", f}};
    }
};

/// Per-transaction score: a labeled exploit counts as found when the report flags its hash.
inline Score score(const Report& rep, const LabelStore& labels)
{
    Score s;
    const std::set<Hash32> flagged = rep.flagged_txs();
    for (const auto& [h, l] : labels)
        if (l.exploit())
        {
            ++s.labels;
            if (flagged.contains(h))
                ++s.tp;
            else
                s.missed.push_back(h);
        }
    for (const auto& h : flagged)
    {
        const auto it = labels.find(h);
        if (it == labels.end() || !it->second.exploit())
            s.false_alarms.push_back(h);
    }
    s.fn = s.missed.size();
    s.fp = s.false_alarms.size();
    return s;
}

/// The canonical investigation of a generated fixture directory.
inline InvestigationConfig fixture_config(const std::filesystem::path& dir, const std::string& level, Mode mode,
                                          const std::optional<std::filesystem::path>& cache_dir = std::nullopt)
{
    std::string scenario;
    (void)load_chain(dir, &scenario);
    InvestigationConfig c;
    c.tag = scenario + "[" + level + "][" + to_string(mode) + "]";
    c.filter = ComponentSpec{"explorer", {{"internal", "true"}}};
    c.explorer = ComponentSpec{"local", {{"dir", dir.string()}}};
    c.detector = ComponentSpec{level, {{"vulns", (dir / "vulns" / (scenario + ".json")).string()}}};
    c.mode = mode;
    c.cache_dir = cache_dir;
    return c;
}

// --- performance harness ---------------------------------------------------------------------

struct BenchRow
{
    std::string axis;
    std::uint64_t magnitude = 0;
    std::string mode;
    std::string level;
    std::uint64_t steps = 0;          ///< instructions in the analyzed trace
    std::uint64_t storage_entries = 0;  ///< non-zero storage words of the contract
    double seconds = 0;               ///< median of fetch + analyze
    double fetch_seconds = 0;
    double analyze_seconds = 0;
};

inline std::string bench_csv(const std::vector<BenchRow>& rows)
{
    std::string out = "axis,magnitude,mode,level,steps,storage_entries,seconds,fetch_seconds,analyze_seconds\n";
    char line[256];
    for (const auto& r : rows)
    {
        std::snprintf(line, sizeof line, "%s,%llu,%s,%s,%llu,%llu,%.6f,%.6f,%.6f\n", r.axis.c_str(),
                      static_cast<unsigned long long>(r.magnitude), r.mode.c_str(), r.level.c_str(),
                      static_cast<unsigned long long>(r.steps), static_cast<unsigned long long>(r.storage_entries),
                      r.seconds, r.fetch_seconds, r.analyze_seconds);
        out += line;
    }
    return out;
}

struct BenchOptions
{
    std::string axis = "instructions";
    std::vector<std::uint64_t> magnitudes;
    Mode mode = Mode::local;
    std::string level = "evm";
    std::filesystem::path workdir;
    int reps = 3;
    std::uint64_t seed = 1;
};

/// Times the detector over scaled fixtures. Fixture generation, the filter stage and one warm-up
/// run (which also fills the cache in cached mode) are excluded from the measurement.
inline std::vector<BenchRow> bench(const BenchOptions& opt)
{
    if (opt.magnitudes.empty())
        throw UsageError("bench needs at least one magnitude");
    if (opt.reps < 1)
        throw UsageError("bench needs at least one repetition");
    if (opt.mode == Mode::custom_tracer && opt.level != "evm")
        throw ConfigError("customTracer mode requires the evm detector");
    std::vector<BenchRow> rows;
    for (const std::uint64_t mag : opt.magnitudes)
    {
        const std::string base = opt.axis == "storage" ? "TargetUnderflow" : "DelayedUnderflow";
        const std::filesystem::path dir = opt.workdir / (opt.axis + "-" + std::to_string(mag));
        std::uint64_t steps = 0, entries = 0;
        {
            const Fixture f = scale_fixture(base, opt.axis, mag, opt.seed);
            for (const auto& [h, doc] : f.traces)
                steps += doc.steps.size();
            const GlobalState& head = f.node.state(f.node.head().state_root);
            for (const auto& [a, acc] : head.accounts())
                if (a == f.vuln.contract)
                    entries = acc.storage.size();
            std::filesystem::remove_all(dir);
            write_fixture(f, dir);
        }
        std::optional<std::filesystem::path> cache;
        if (opt.mode == Mode::cached)
        {
            cache = opt.workdir / ("cache-" + opt.axis + "-" + std::to_string(mag) + "-" + opt.level);
            std::filesystem::remove_all(*cache);
        }
        InvestigationConfig cfg = fixture_config(dir, opt.level, opt.mode, cache);
        cfg.filter.params["internal"] = "false";
        Pipeline p = load_pipeline(cfg);
        const std::vector<TxRef> txs = tx_list(*p.backend, p.query);
        const std::string rule_id = opt.level == "evm" ? p.spec.evm_rule : p.spec.block->rule;
        const auto run_once = [&](double& fetch) {
            p.timed->reset();
            const auto t0 = std::chrono::steady_clock::now();
            if (opt.level == "evm")
            {
                const auto rule = make_evm_rule(rule_id, p.spec);
                (void)run_evm_detector(txs, *rule, p.explorer(), EvmRunOptions{opt.mode == Mode::custom_tracer});
            }
            else
            {
                const auto rule = make_block_rule(rule_id, p.spec);
                (void)run_block_detector(txs, *rule, p.explorer());
            }
            const double t = detail::seconds_since(t0);
            fetch = std::min(t, p.timed->seconds());
            return t;
        };
        double fetch = 0;
        (void)run_once(fetch);
        std::vector<std::pair<double, double>> samples;
        for (int r = 0; r < opt.reps; ++r)
        {
            const double t = run_once(fetch);
            samples.emplace_back(t, fetch);
        }
        std::sort(samples.begin(), samples.end());
        const auto& mid = samples[samples.size() / 2];
        rows.push_back(BenchRow{opt.axis, mag, to_string(opt.mode), opt.level, steps, entries, mid.first, mid.second,
                                mid.first - mid.second});
    }
    return rows;
}

/// Coefficient of determination of the least-squares line through (x, y).
inline double linear_r2(const std::vector<double>& x, const std::vector<double>& y)
{
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n)
        throw UsageError("linear fit needs at least two paired points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i)
    {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i)
    {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0)
        return syy == 0 ? 1.0 : 0.0;
    return (sxy * sxy) / (sxx * syy);
}
}  // namespace evmioc
