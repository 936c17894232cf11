// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chain.hpp"
#include "codec.hpp"
#include "errors.hpp"
#include "fixtures.hpp"
#include "ingest.hpp"

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace evmioc
{
/// A block with its parent header; parent receipts are not part of the payload.
struct BlockDetails
{
    Block block;
    std::optional<Block> parent;
};

/// Archive-node access. Every query is an (endpoint, params) pair answered by a payload string;
/// historical payloads are immutable, which is what lets a cache sit in front of any backend.
///
/// Endpoints and payloads:
///   blockNumber  {}                              hex quantity
///   blockDetails {number}                        {"block": block+receipts, "parent": header|null}
///   txTrace      {hash, tracer: spec|null}       canonical trace document
///   storage      {address, key, block}           "0x" + 64 hex digits
///   balance      {address, block}                hex quantity
class Explorer
{
public:
    virtual ~Explorer() = default;

    virtual std::string fetch(const std::string& endpoint, const Json& params) = 0;

    std::uint64_t block_number() { return u64_from_hex(fetch("blockNumber", Json::object())); }

    BlockDetails collect_block_details(std::uint64_t number)
    {
        const std::string payload = fetch("blockDetails", {{"number", number}});
        try
        {
            const Json j = Json::parse(payload);
            BlockDetails d{codec::block_from_json(codec::require(j, "block")), std::nullopt};
            const Json& p = codec::require(j, "parent");
            if (!p.is_null())
            {
                Json header = p;
                header["receipts"] = Json::array();
                header["transactions"] = Json::array();
                d.parent = codec::block_from_json(header);
            }
            return d;
        }
        catch (const nlohmann::json::exception& e)
        {
            throw ProtocolError(std::string("malformed block payload: ") + e.what());
        }
    }

    std::string tx_trace(const Hash32& hash, const std::optional<TracerSpec>& tracer = std::nullopt)
    {
        return fetch("txTrace", {{"hash", hash.hex()}, {"tracer", tracer ? tracer->to_json() : Json(nullptr)}});
    }

    Word256 get_storage(const Address& a, const Word256& key, std::uint64_t block)
    {
        return word_from_hex(fetch("storage", {{"address", a.hex()}, {"key", "0x" + to_hex_word(key)}, {"block", block}}));
    }

    Wei get_balance(const Address& a, std::uint64_t block)
    {
        return word_from_hex(fetch("balance", {{"address", a.hex()}, {"block", block}}));
    }
};

/// State after block `block`, read lazily through an explorer.
class ExplorerStateView final : public StateView
{
public:
    ExplorerStateView(Explorer& ex, std::uint64_t block) : ex_(&ex), block_(block) {}

    Word256 storage(const Address& a, const Word256& key) const override { return ex_->get_storage(a, key, block_); }
    Wei balance(const Address& a) const override { return ex_->get_balance(a, block_); }

private:
    Explorer* ex_;
    std::uint64_t block_;
};

namespace detail
{
inline std::uint64_t param_u64(const Json& p, const char* key)
{
    const auto it = p.find(key);
    if (it == p.end() || !it->is_number_integer() || (!it->is_number_unsigned() && it->get<std::int64_t>() < 0))
        throw ProtocolError(std::string("query parameter '") + key + "' must be an unsigned integer");
    return it->get<std::uint64_t>();
}

inline std::string canonical_trace(std::string_view doc, bool filtered)
{
    return serialize_trace(parse_struct_logs(doc, ParseOptions{filtered}));
}
}  // namespace detail

/// Serves a fixture directory. Storage and balance queries parse the whole state snapshot,
/// as a node without a state index would.
class LocalBackend final : public Explorer
{
public:
    explicit LocalBackend(std::filesystem::path dir) : dir_(std::move(dir)) { chain_ = load_chain(dir_); }

    const std::vector<Block>& chain() const noexcept { return chain_; }
    const std::filesystem::path& dir() const noexcept { return dir_; }

    std::string fetch(const std::string& endpoint, const Json& p) override
    {
        if (endpoint == "blockNumber")
            return to_hex_quantity(chain_.back().number);
        if (endpoint == "blockDetails")
        {
            const Block& b = block(detail::param_u64(p, "number"));
            Json parent = b.number == 0 ? Json(nullptr) : codec::block_header_to_json(chain_[b.number - 1]);
            if (!parent.is_null())
                parent.erase("transactions");
            return Json{{"block", codec::block_to_json(b)}, {"parent", parent}}.dump();
        }
        if (endpoint == "txTrace")
        {
            const Hash32 h = Hash32::from_hex(codec::str(p, "hash"));
            const std::string raw = detail::read_text(dir_ / "traces" / (h.plain_hex() + ".json"));
            const auto it = p.find("tracer");
            if (it == p.end() || it->is_null())
                return detail::canonical_trace(raw, false);
            return serialize_trace(filter_trace(parse_struct_logs(raw), TracerSpec::from_json(*it)));
        }
        if (endpoint == "storage")
        {
            const Json state = snapshot(detail::param_u64(p, "block"));
            return "0x" + to_hex_word(codec::storage_from_state_json(state, Address::from_hex(codec::str(p, "address")),
                                                                      word_from_hex(codec::str(p, "key"))));
        }
        if (endpoint == "balance")
        {
            const Json state = snapshot(detail::param_u64(p, "block"));
            return to_hex_quantity(codec::balance_from_state_json(state, Address::from_hex(codec::str(p, "address"))));
        }
        throw ProtocolError("unknown explorer endpoint '" + endpoint + "'");
    }

    const Block& block(std::uint64_t n) const
    {
        if (n >= chain_.size())
            throw RangeError("block " + std::to_string(n) + " beyond chain height " + std::to_string(chain_.back().number));
        return chain_[n];
    }

private:
    Json snapshot(std::uint64_t n) const
    {
        return detail::read_json(dir_ / "states" / (block(n).state_root.plain_hex() + ".json"));
    }

    std::filesystem::path dir_;
    std::vector<Block> chain_;
};

// --- JSON-RPC wire mapping --------------------------------------------------------------------

inline constexpr int kRpcArchiveGap = -32001;
inline constexpr int kRpcInvalidParams = -32602;
inline constexpr int kRpcMethodNotFound = -32601;

/// Answers the wire methods from a local fixture: eth_blockNumber, eth_getBlockByNumber,
/// eth_getTransactionReceipt, debug_traceTransaction, eth_getStorageAt, eth_getBalance.
class RpcServer
{
public:
    explicit RpcServer(std::filesystem::path fixture_dir) : backend_(std::move(fixture_dir))
    {
        for (std::size_t n = 0; n < backend_.chain().size(); ++n)
            for (const auto& r : backend_.chain()[n].receipts)
                receipts_.emplace(r.tx_hash, std::make_pair(n, r));
        server_.Post("/", [this](const httplib::Request& req, httplib::Response& res) {
            res.set_content(handle(req.body), "application/json");
        });
    }

    ~RpcServer() { stop(); }

    /// Binds to `port` on 127.0.0.1 (0 picks a free port) and serves on a background thread.
    int start(int port = 0)
    {
        port_ = port == 0 ? server_.bind_to_any_port("127.0.0.1") : (server_.bind_to_port("127.0.0.1", port) ? port : -1);
        if (port_ <= 0)
            throw ConfigError("cannot bind RPC server to port " + std::to_string(port));
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port_;
    }

    /// Serves on the calling thread until stop().
    void listen(const std::string& host, int port)
    {
        if (!server_.listen(host, port))
            throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
    }

    void stop()
    {
        server_.stop();
        if (thread_.joinable())
            thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
    std::uint64_t requests() const noexcept { return requests_.load(); }

    /// One JSON-RPC 2.0 request body to one response body.
    std::string handle(const std::string& body)
    {
        ++requests_;
        Json id = nullptr;
        const auto error = [&](int code, const std::string& msg) {
            return Json{{"jsonrpc", "2.0"}, {"id", id}, {"error", {{"code", code}, {"message", msg}}}}.dump();
        };
        try
        {
            const Json req = Json::parse(body);
            id = req.value("id", Json(nullptr));
            const std::string method = codec::str(req, "method");
            const Json params = req.value("params", Json::array());
            return Json{{"jsonrpc", "2.0"}, {"id", id}, {"result", dispatch(method, params)}}.dump();
        }
        catch (const ArchiveGapError& e)
        {
            return error(kRpcArchiveGap, e.what());
        }
        catch (const RangeError& e)
        {
            return error(kRpcInvalidParams, e.what());
        }
        catch (const std::out_of_range& e)
        {
            return error(kRpcMethodNotFound, e.what());
        }
        catch (const std::exception& e)
        {
            return error(kRpcInvalidParams, e.what());
        }
    }

private:
    Json dispatch(const std::string& method, const Json& params)
    {
        const auto arg = [&](std::size_t i) -> const Json& {
            if (!params.is_array() || params.size() <= i)
                throw ProtocolError(method + ": missing parameter " + std::to_string(i));
            return params[i];
        };
        const auto tag = [&](std::size_t i) { return u64_from_hex(arg(i).get<std::string>()); };
        if (method == "eth_blockNumber")
            return backend_.fetch("blockNumber", Json::object());
        if (method == "eth_getBlockByNumber")
            return codec::block_header_to_json(backend_.block(tag(0)));
        if (method == "eth_getTransactionReceipt")
        {
            const auto it = receipts_.find(Hash32::from_hex(arg(0).get<std::string>()));
            if (it == receipts_.end())
                return nullptr;
            Json r = codec::receipt_to_json(it->second.second);
            r["blockNumber"] = to_hex_quantity(static_cast<std::uint64_t>(it->second.first));
            return r;
        }
        if (method == "debug_traceTransaction")
        {
            Json q = {{"hash", arg(0).get<std::string>()}, {"tracer", nullptr}};
            if (params.size() > 1 && params[1].contains("tracer"))
            {
                if (params[1].at("tracer") != kPcFilterTracer)
                    throw ProtocolError("unsupported tracer " + params[1].at("tracer").dump());
                q["tracer"] = params[1].value("tracerConfig", Json::object());
            }
            return Json::parse(backend_.fetch("txTrace", q));
        }
        if (method == "eth_getStorageAt")
            return backend_.fetch("storage", {{"address", arg(0)}, {"key", "0x" + to_hex_word(word_from_hex(arg(1).get<std::string>()))},
                                              {"block", tag(2)}});
        if (method == "eth_getBalance")
            return backend_.fetch("balance", {{"address", arg(0)}, {"block", tag(1)}});
        throw std::out_of_range("method not found: " + method);
    }

    LocalBackend backend_;
    std::map<Hash32, std::pair<std::size_t, Receipt>> receipts_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<std::uint64_t> requests_{0};
};

struct RpcOptions
{
    int retries = 3;
    std::chrono::milliseconds backoff{50};
    std::chrono::milliseconds timeout{10'000};
};

/// JSON-RPC client; responses are normalized into the LocalBackend payload shapes.
class RpcBackend final : public Explorer
{
public:
    explicit RpcBackend(std::string url, RpcOptions opt = {}) : url_(std::move(url)), opt_(opt), client_(url_)
    {
        if (!client_.is_valid())
            throw ConfigError("invalid RPC endpoint '" + url_ + "'");
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opt_.timeout);
        client_.set_connection_timeout(std::max<time_t>(1, static_cast<time_t>(secs.count())));
        client_.set_read_timeout(std::max<time_t>(1, static_cast<time_t>(secs.count())));
    }

    std::uint64_t wire_calls() const noexcept { return wire_calls_; }

    std::string fetch(const std::string& endpoint, const Json& p) override
    {
        if (endpoint == "blockNumber")
            return as_string(call("eth_blockNumber", Json::array()));
        if (endpoint == "blockDetails")
        {
            const std::uint64_t n = detail::param_u64(p, "number");
            Json block = call("eth_getBlockByNumber", {to_hex_quantity(n), true});
            check_object(block, "eth_getBlockByNumber");
            Json receipts = Json::array();
            for (const auto& tx : codec::require(block, "transactions"))
            {
                Json r = call("eth_getTransactionReceipt", {codec::str(tx, "hash")});
                check_object(r, "eth_getTransactionReceipt");
                r.erase("blockNumber");
                receipts.push_back(std::move(r));
            }
            block["receipts"] = std::move(receipts);
            Json parent = nullptr;
            if (n > 0)
            {
                parent = call("eth_getBlockByNumber", {to_hex_quantity(n - 1), false});
                check_object(parent, "eth_getBlockByNumber");
                parent.erase("transactions");
            }
            try
            {
                (void)codec::block_from_json(block);
            }
            catch (const std::exception& e)
            {
                throw ProtocolError(std::string("malformed block from RPC: ") + e.what());
            }
            return Json{{"block", block}, {"parent", parent}}.dump();
        }
        if (endpoint == "txTrace")
        {
            Json opts = Json::object();
            const auto it = p.find("tracer");
            const bool filtered = it != p.end() && !it->is_null();
            if (filtered)
                opts = {{"tracer", kPcFilterTracer}, {"tracerConfig", *it}};
            const Json doc = call("debug_traceTransaction", {codec::str(p, "hash"), opts});
            check_object(doc, "debug_traceTransaction");
            try
            {
                return detail::canonical_trace(doc.dump(), filtered);
            }
            catch (const ParseError& e)
            {
                throw ProtocolError(std::string("malformed trace from RPC: ") + e.what());
            }
        }
        if (endpoint == "storage")
        {
            const std::string v = as_string(call("eth_getStorageAt", {codec::str(p, "address"), codec::str(p, "key"),
                                                                      to_hex_quantity(detail::param_u64(p, "block"))}));
            return "0x" + to_hex_word(parse_word(v));
        }
        if (endpoint == "balance")
            return to_hex_quantity(parse_word(
                as_string(call("eth_getBalance", {codec::str(p, "address"), to_hex_quantity(detail::param_u64(p, "block"))}))));
        throw ProtocolError("unknown explorer endpoint '" + endpoint + "'");
    }

private:
    static void check_object(const Json& j, const char* method)
    {
        if (!j.is_object())
            throw ProtocolError(std::string(method) + " returned no object");
    }

    static std::string as_string(const Json& j)
    {
        if (!j.is_string())
            throw ProtocolError("expected a hex string result, got " + j.dump());
        return j.get<std::string>();
    }

    static Word256 parse_word(const std::string& s)
    {
        try
        {
            return word_from_hex(s);
        }
        catch (const ParseError& e)
        {
            throw ProtocolError(std::string("malformed quantity from RPC: ") + e.what());
        }
    }

    Json call(const std::string& method, const Json& params)
    {
        const std::string body =
            Json{{"jsonrpc", "2.0"}, {"id", ++next_id_}, {"method", method}, {"params", params}}.dump();
        std::string last_error;
        for (int attempt = 0; attempt <= opt_.retries; ++attempt)
        {
            if (attempt > 0)
                std::this_thread::sleep_for(opt_.backoff * (1 << (attempt - 1)));
            ++wire_calls_;
            const auto res = client_.Post("/", body, "application/json");
            if (!res)
            {
                last_error = httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500)
            {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            Json reply;
            try
            {
                reply = Json::parse(res->body);
            }
            catch (const nlohmann::json::parse_error&)
            {
                throw ProtocolError(method + ": response is not JSON");
            }
            if (!reply.is_object())
                throw ProtocolError(method + ": response is not a JSON-RPC object");
            if (reply.contains("error"))
            {
                const Json& err = reply.at("error");
                const int code = err.value("code", 0);
                const std::string msg = err.value("message", std::string{});
                if (code == kRpcArchiveGap)
                    throw ArchiveGapError(method + ": " + msg);
                if (code == kRpcInvalidParams && msg.find("beyond chain height") != std::string::npos)
                    throw RangeError(method + ": " + msg);
                throw ProtocolError(method + " failed (" + std::to_string(code) + "): " + msg);
            }
            if (!reply.contains("result"))
                throw ProtocolError(method + ": response lacks a result");
            return reply.at("result");
        }
        throw ArchiveGapError(method + ": endpoint " + url_ + " unreachable after " + std::to_string(opt_.retries + 1) +
                              " attempts (" + last_error + ")");
    }

    std::string url_;
    RpcOptions opt_;
    httplib::Client client_;
    std::uint64_t next_id_ = 0;
    std::uint64_t wire_calls_ = 0;
};

/// Read-through cache: `<digest(key)>.json` holds the payload, `<digest(key)>.meta.json` the key
/// and the payload digest. Entries that fail verification are discarded and refetched.
class CachedExplorer final : public Explorer
{
public:
    CachedExplorer(Explorer& inner, std::filesystem::path dir) : inner_(&inner), dir_(std::move(dir))
    {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec)
            throw ConfigError("cannot create cache directory " + dir_.string() + ": " + ec.message());
    }

    static std::string cache_key(const std::string& endpoint, const Json& params) { return endpoint + " " + params.dump(); }

    std::string fetch(const std::string& endpoint, const Json& params) override
    {
        if (endpoint == "blockNumber")  // the head moves; never cached
        {
            ++inner_calls_;
            return inner_->fetch(endpoint, params);
        }
        const std::string key = cache_key(endpoint, params);
        const std::string stem = digest(key).plain_hex();
        const auto payload_path = dir_ / (stem + ".json"), meta_path = dir_ / (stem + ".meta.json");
        if (auto hit = lookup(key, payload_path, meta_path))
        {
            ++hits_;
            return *std::move(hit);
        }
        ++inner_calls_;
        ++misses_;
        std::string payload = inner_->fetch(endpoint, params);
        store(payload_path, payload);
        store(meta_path, Json{{"key", key}, {"payloadDigest", digest(payload).hex()}}.dump());
        return payload;
    }

    std::uint64_t inner_calls() const noexcept { return inner_calls_; }
    /// Inner calls for cacheable queries, excluding chain-head lookups.
    std::uint64_t misses() const noexcept { return misses_; }
    std::uint64_t hits() const noexcept { return hits_; }
    std::uint64_t discarded() const noexcept { return discarded_; }

private:
    std::optional<std::string> lookup(const std::string& key, const std::filesystem::path& payload_path,
                                      const std::filesystem::path& meta_path)
    {
        if (!std::filesystem::exists(meta_path) || !std::filesystem::exists(payload_path))
            return std::nullopt;
        try
        {
            const Json meta = Json::parse(detail::read_text(meta_path));
            std::string payload = detail::read_text(payload_path);
            if (meta.at("key") == key && meta.at("payloadDigest") == digest(payload).hex())
                return payload;
        }
        catch (const std::exception&)
        {
        }
        ++discarded_;
        std::error_code ec;
        std::filesystem::remove(payload_path, ec);
        std::filesystem::remove(meta_path, ec);
        return std::nullopt;
    }

    void store(const std::filesystem::path& path, const std::string& text)
    {
        const auto tmp = path.string() + ".tmp" + std::to_string(++tmp_counter_);
        detail::write_text(tmp, text);
        std::error_code ec;
        std::filesystem::rename(tmp, path, ec);
        if (ec)
            throw ConfigError("cannot write cache entry " + path.string() + ": " + ec.message());
    }

    Explorer* inner_;
    std::filesystem::path dir_;
    std::uint64_t inner_calls_ = 0, misses_ = 0, hits_ = 0, discarded_ = 0, tmp_counter_ = 0;
};

/// Accumulates wall-clock time and call counts spent inside the wrapped explorer.
class TimedExplorer final : public Explorer
{
public:
    explicit TimedExplorer(Explorer& inner) : inner_(&inner) {}

    std::string fetch(const std::string& endpoint, const Json& params) override
    {
        const auto t0 = std::chrono::steady_clock::now();
        struct Charge
        {
            TimedExplorer* self;
            std::chrono::steady_clock::time_point t0;
            ~Charge() { self->elapsed_ += std::chrono::steady_clock::now() - t0; }
        } charge{this, t0};
        ++calls_;
        return inner_->fetch(endpoint, params);
    }

    double seconds() const { return std::chrono::duration<double>(elapsed_).count(); }
    std::uint64_t calls() const noexcept { return calls_; }
    void reset()
    {
        elapsed_ = {};
        calls_ = 0;
    }

private:
    Explorer* inner_;
    std::chrono::steady_clock::duration elapsed_{};
    std::uint64_t calls_ = 0;
};
}  // namespace evmioc
