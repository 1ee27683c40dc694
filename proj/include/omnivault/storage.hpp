#pragma once

// Untrusted cloud abstraction: object store + message-file rendezvous +
// capability links. Reference backends: in-memory (cv-signalled) and local
// directory (50 ms polling, atomic rename puts). An injectable interceptor
// models the network adversary — it sees and may rewrite or drop every object
// operation; integrity must come from the layers above.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "crypto.hpp"

namespace omnivault {

using namespace std::chrono_literals;

inline std::string make_uuid() {
    Bytes r = random_bytes(16);
    r[6] = static_cast<uint8_t>((r[6] & 0x0f) | 0x40); // version 4
    r[8] = static_cast<uint8_t>((r[8] & 0x3f) | 0x80); // variant 10
    std::string h = to_hex(r);
    return h.substr(0, 8) + "-" + h.substr(8, 4) + "-" + h.substr(12, 4) + "-" +
           h.substr(16, 4) + "-" + h.substr(20);
}

static constexpr const char* MESSAGES_PREFIX = "messages/";
static constexpr const char* PEERS_PREFIX = "peers/";

struct ProtocolMessage {
    std::string uuid;
    std::string msg_type;
    std::map<std::string, std::string> payload; // big ints hex, bytes base64
    std::string reply_uuid;     // expected response filename, if any
    Bytes target_device_id;     // initial messages only; encoded in the key path

    std::string object_key() const {
        if (!target_device_id.empty())
            return std::string(MESSAGES_PREFIX) + to_hex(target_device_id) + "/" + uuid;
        return std::string(MESSAGES_PREFIX) + uuid;
    }

    Bytes serialize() const {
        nlohmann::json j;
        j["uuid"] = uuid;
        j["msg_type"] = msg_type;
        j["payload"] = payload;
        if (!reply_uuid.empty()) j["reply_uuid"] = reply_uuid;
        std::string s = j.dump();
        return to_bytes(s);
    }

    static ProtocolMessage parse(BytesView raw) {
        nlohmann::json j = nlohmann::json::parse(to_string(raw), nullptr, false);
        if (j.is_discarded() || !j.is_object())
            fail(ErrorCode::MalformedMessage, "not a JSON object");
        ProtocolMessage m;
        try {
            m.uuid = j.at("uuid").get<std::string>();
            m.msg_type = j.at("msg_type").get<std::string>();
            m.payload = j.at("payload").get<std::map<std::string, std::string>>();
            if (j.contains("reply_uuid")) m.reply_uuid = j.at("reply_uuid").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::MalformedMessage, e.what());
        }
        return m;
    }
};

struct PublicLink {
    Bytes token;         // 16 unguessable bytes
    std::string locator; // which provider root the token lives under

    std::string to_string() const { return locator + "#" + to_hex(token); }

    static PublicLink from_string(const std::string& s) {
        auto pos = s.rfind('#');
        if (pos == std::string::npos) fail(ErrorCode::InvalidLink, "missing token part");
        PublicLink l;
        l.locator = s.substr(0, pos);
        try {
            l.token = from_hex(s.substr(pos + 1));
        } catch (const Error&) {
            fail(ErrorCode::InvalidLink, "bad token encoding");
        }
        if (l.token.size() != 16) fail(ErrorCode::InvalidLink, "token must be 16 bytes");
        return l;
    }
};

// Adversary interposition hook. Called outside backend locks, so a hook may
// re-enter the backend (inject its own objects).
struct Interceptor {
    virtual ~Interceptor() = default;
    // May rewrite data in flight; return false to drop the write entirely.
    virtual bool on_put(const std::string& key, Bytes& data) { (void)key; (void)data; return true; }
    // May rewrite what the reader sees.
    virtual void on_get(const std::string& key, Bytes& data) { (void)key; (void)data; }
};

class Backend {
public:
    virtual ~Backend() = default;

    void set_interceptor(Interceptor* i) { interceptor_ = i; }
    void set_latency(std::chrono::milliseconds d) { latency_ = d; }
    const std::string& locator() const { return locator_; }

    void put(const std::string& key, BytesView data) {
        delay();
        Bytes d(data.begin(), data.end());
        if (interceptor_ && !interceptor_->on_put(key, d)) return; // dropped
        do_put(key, d);
    }

    Bytes get(const std::string& key) {
        delay();
        Bytes d = do_get(key);
        if (interceptor_) interceptor_->on_get(key, d);
        return d;
    }

    std::vector<std::string> list(const std::string& prefix) {
        delay();
        return do_list(prefix);
    }

    void del(const std::string& key) {
        delay();
        do_del(key);
    }

    bool exists(const std::string& key) {
        delay();
        return do_exists(key);
    }

    // Blocks until the object appears (through the interceptor's get) or the
    // deadline passes / the caller is cancelled.
    Bytes await_key(const std::string& key, std::chrono::milliseconds timeout,
                    std::stop_token st = {}) {
        auto deadline = std::chrono::steady_clock::now() + timeout;
        for (;;) {
            if (do_exists(key)) return get(key);
            if (st.stop_requested()) fail(ErrorCode::TimedOut, "await cancelled: " + key);
            if (std::chrono::steady_clock::now() >= deadline)
                fail(ErrorCode::TimedOut, "no object at " + key);
            wait_for_change(key, 50ms, st);
        }
    }

    // First key under prefix (lexicographic), for inbox scans.
    Bytes await_prefix(const std::string& prefix, std::string& found_key,
                       std::chrono::milliseconds timeout, std::stop_token st = {}) {
        auto deadline = std::chrono::steady_clock::now() + timeout;
        for (;;) {
            auto keys = do_list(prefix);
            if (!keys.empty()) {
                std::sort(keys.begin(), keys.end());
                found_key = keys.front();
                return get(found_key);
            }
            if (st.stop_requested()) fail(ErrorCode::TimedOut, "await cancelled: " + prefix);
            if (std::chrono::steady_clock::now() >= deadline)
                fail(ErrorCode::TimedOut, "no object under " + prefix);
            wait_for_change(prefix, 50ms, st);
        }
    }

    // Capability links: token -> object key, resolvable without list access.
    PublicLink make_link(const std::string& key) {
        if (!do_exists(key)) fail(ErrorCode::NotFound, key);
        Bytes token = random_bytes(16);
        do_store_link(to_hex(token), key);
        return PublicLink{token, locator_};
    }

    Bytes resolve_link(const Bytes& token) {
        std::string key = do_resolve_link(to_hex(token));
        return get(key); // through the interceptor: links give no integrity either
    }

protected:
    virtual void do_put(const std::string& key, const Bytes& data) = 0;
    virtual Bytes do_get(const std::string& key) = 0;
    virtual std::vector<std::string> do_list(const std::string& prefix) = 0;
    virtual void do_del(const std::string& key) = 0;
    virtual bool do_exists(const std::string& key) = 0;
    virtual void do_store_link(const std::string& token_hex, const std::string& key) = 0;
    virtual std::string do_resolve_link(const std::string& token_hex) = 0;
    virtual void wait_for_change(const std::string& key, std::chrono::milliseconds poll,
                                 std::stop_token st) {
        // default: sliced sleep so cancellation stays responsive
        (void)key;
        auto end = std::chrono::steady_clock::now() + poll;
        while (std::chrono::steady_clock::now() < end && !st.stop_requested())
            std::this_thread::sleep_for(5ms);
    }

    void delay() {
        if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
    }

    std::string locator_;

private:
    Interceptor* interceptor_ = nullptr;
    std::chrono::milliseconds latency_{0};
};

// Registry lets links minted under one live backend be fetched from another.
namespace detail {
inline std::mutex& backend_registry_mutex() {
    static std::mutex m;
    return m;
}
inline std::map<std::string, Backend*>& backend_registry() {
    static std::map<std::string, Backend*> r;
    return r;
}
} // namespace detail

class MemoryBackend : public Backend {
public:
    MemoryBackend() {
        static std::atomic<uint64_t> counter{0};
        locator_ = "mem:" + std::to_string(counter.fetch_add(1));
        std::lock_guard lk(detail::backend_registry_mutex());
        detail::backend_registry()[locator_] = this;
    }
    ~MemoryBackend() override {
        std::lock_guard lk(detail::backend_registry_mutex());
        detail::backend_registry().erase(locator_);
    }

protected:
    void do_put(const std::string& key, const Bytes& data) override {
        {
            std::lock_guard lk(mutex_);
            objects_[key] = data;
            ++version_;
        }
        cv_.notify_all();
    }
    Bytes do_get(const std::string& key) override {
        std::lock_guard lk(mutex_);
        auto it = objects_.find(key);
        if (it == objects_.end()) fail(ErrorCode::NotFound, key);
        return it->second;
    }
    std::vector<std::string> do_list(const std::string& prefix) override {
        std::lock_guard lk(mutex_);
        std::vector<std::string> out;
        for (auto it = objects_.lower_bound(prefix); it != objects_.end(); ++it) {
            if (it->first.compare(0, prefix.size(), prefix) != 0) break;
            out.push_back(it->first);
        }
        return out;
    }
    void do_del(const std::string& key) override {
        std::lock_guard lk(mutex_);
        if (objects_.erase(key) == 0) fail(ErrorCode::NotFound, key);
        ++version_;
        cv_.notify_all();
    }
    bool do_exists(const std::string& key) override {
        std::lock_guard lk(mutex_);
        return objects_.count(key) > 0;
    }
    void do_store_link(const std::string& token_hex, const std::string& key) override {
        std::lock_guard lk(mutex_);
        links_[token_hex] = key;
    }
    std::string do_resolve_link(const std::string& token_hex) override {
        std::lock_guard lk(mutex_);
        auto it = links_.find(token_hex);
        if (it == links_.end()) fail(ErrorCode::InvalidLink, "unknown token");
        return it->second;
    }
    void wait_for_change(const std::string&, std::chrono::milliseconds poll,
                         std::stop_token st) override {
        std::unique_lock lk(mutex_);
        uint64_t seen = version_;
        if (st.stop_possible()) {
            cv_.wait_for(lk, st, poll, [&] { return version_ != seen; });
        } else {
            cv_.wait_for(lk, poll, [&] { return version_ != seen; });
        }
    }

private:
    std::mutex mutex_;
    std::condition_variable_any cv_;
    std::map<std::string, Bytes> objects_;
    std::map<std::string, std::string> links_;
    uint64_t version_ = 0;
};

// Local-directory backend: object keys are relative paths under the root;
// writes go to a temp name then rename() so readers never see partial bytes.
class LocalDirBackend : public Backend {
public:
    explicit LocalDirBackend(const std::filesystem::path& root) : root_(root) {
        namespace fs = std::filesystem;
        fs::create_directories(root_);
        root_ = fs::weakly_canonical(root_);
        fs::create_directories(root_ / ".tmp");
        fs::create_directories(root_ / ".links");
        locator_ = "dir:" + root_.string();
        std::lock_guard lk(detail::backend_registry_mutex());
        detail::backend_registry()[locator_] = this;
    }
    ~LocalDirBackend() override {
        std::lock_guard lk(detail::backend_registry_mutex());
        detail::backend_registry().erase(locator_);
    }

    static Bytes resolve_at(const std::filesystem::path& root, const std::string& token_hex) {
        namespace fs = std::filesystem;
        std::ifstream lf(root / ".links" / token_hex, std::ios::binary);
        if (!lf) fail(ErrorCode::InvalidLink, "unknown token");
        std::string key((std::istreambuf_iterator<char>(lf)), std::istreambuf_iterator<char>());
        std::ifstream f(root / key, std::ios::binary);
        if (!f) fail(ErrorCode::NotFound, key);
        return Bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    }

protected:
    void do_put(const std::string& key, const Bytes& data) override {
        namespace fs = std::filesystem;
        fs::path dest = root_ / key;
        fs::create_directories(dest.parent_path());
        fs::path tmp = root_ / ".tmp" / make_uuid();
        {
            std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
            if (!f) fail(ErrorCode::CryptoFailure, "cannot open temp file");
            f.write(reinterpret_cast<const char*>(data.data()),
                    static_cast<std::streamsize>(data.size()));
        }
        fs::rename(tmp, dest);
    }
    Bytes do_get(const std::string& key) override {
        std::ifstream f(root_ / key, std::ios::binary);
        if (!f) fail(ErrorCode::NotFound, key);
        return Bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    }
    std::vector<std::string> do_list(const std::string& prefix) override {
        namespace fs = std::filesystem;
        std::vector<std::string> out;
        if (!fs::exists(root_)) return out;
        for (auto it = fs::recursive_directory_iterator(root_);
             it != fs::recursive_directory_iterator(); ++it) {
            if (it->is_directory()) {
                auto name = it->path().filename().string();
                if (it.depth() == 0 && (name == ".tmp" || name == ".links")) it.disable_recursion_pending();
                continue;
            }
            std::string key = fs::relative(it->path(), root_).generic_string();
            if (key.compare(0, prefix.size(), prefix) == 0) out.push_back(key);
        }
        std::sort(out.begin(), out.end());
        return out;
    }
    void do_del(const std::string& key) override {
        namespace fs = std::filesystem;
        std::error_code ec;
        if (!fs::remove(root_ / key, ec) || ec) fail(ErrorCode::NotFound, key);
    }
    bool do_exists(const std::string& key) override {
        return std::filesystem::exists(root_ / key);
    }
    void do_store_link(const std::string& token_hex, const std::string& key) override {
        std::ofstream f(root_ / ".links" / token_hex, std::ios::binary | std::ios::trunc);
        f.write(key.data(), static_cast<std::streamsize>(key.size()));
    }
    std::string do_resolve_link(const std::string& token_hex) override {
        std::ifstream f(root_ / ".links" / token_hex, std::ios::binary);
        if (!f) fail(ErrorCode::InvalidLink, "unknown token");
        return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    }

private:
    std::filesystem::path root_;
};

inline Bytes fetch_foreign_link(const PublicLink& link) {
    {
        std::lock_guard lk(detail::backend_registry_mutex());
        auto it = detail::backend_registry().find(link.locator);
        if (it != detail::backend_registry().end()) return it->second->resolve_link(link.token);
    }
    if (link.locator.rfind("dir:", 0) == 0)
        return LocalDirBackend::resolve_at(link.locator.substr(4), to_hex(link.token));
    fail(ErrorCode::InvalidLink, "unreachable locator " + link.locator);
}

// One user's rooted view of a backend. A prefix lets several simulated users
// share a single backend in tests; the CLI uses an empty prefix over its own
// root directory.
class StorageChannel {
public:
    explicit StorageChannel(Backend& backend, std::string prefix = "")
        : backend_(backend), prefix_(std::move(prefix)) {
        if (!prefix_.empty() && prefix_.back() != '/') prefix_ += '/';
    }

    Backend& backend() { return backend_; }
    const std::string& prefix() const { return prefix_; }

    void put(const std::string& key, BytesView data) { backend_.put(full(key), data); }
    Bytes get(const std::string& key) { return backend_.get(full(key)); }
    void del(const std::string& key) { backend_.del(full(key)); }
    bool exists(const std::string& key) { return backend_.exists(full(key)); }

    std::vector<std::string> list(const std::string& key_prefix) {
        auto keys = backend_.list(prefix_ + normalize(key_prefix, true));
        for (auto& k : keys) k = k.substr(prefix_.size());
        return keys;
    }

    void send_message(const ProtocolMessage& msg) { put(msg.object_key(), msg.serialize()); }

    // Await the object named by uuid, parse, consume. The message is deleted
    // only after a successful parse so malformed injections surface as errors.
    ProtocolMessage await_message(const std::string& uuid, std::chrono::milliseconds timeout,
                                  std::stop_token st = {}) {
        std::string key = std::string(MESSAGES_PREFIX) + uuid;
        Bytes raw = backend_.await_key(full(key), timeout, st);
        ProtocolMessage m = ProtocolMessage::parse(raw);
        if (m.uuid != uuid)
            fail(ErrorCode::MalformedMessage, "uuid field does not match filename");
        del_quiet(key);
        return m;
    }

    // Await any initial message addressed to this device id.
    ProtocolMessage await_message_for_device(const Bytes& device_id,
                                             std::chrono::milliseconds timeout,
                                             std::stop_token st = {}) {
        std::string pfx = std::string(MESSAGES_PREFIX) + to_hex(device_id) + "/";
        std::string found;
        Bytes raw = backend_.await_prefix(full(pfx), found, timeout, st);
        ProtocolMessage m = ProtocolMessage::parse(raw);
        std::string key = found.substr(prefix_.size());
        if (key != pfx + m.uuid)
            fail(ErrorCode::MalformedMessage, "uuid field does not match filename");
        del_quiet(key);
        return m;
    }

    PublicLink make_link(const std::string& key) { return backend_.make_link(full(key)); }

    Bytes fetch_link(const PublicLink& link) {
        if (link.locator == backend_.locator()) return backend_.resolve_link(link.token);
        return fetch_foreign_link(link);
    }

private:
    std::string full(const std::string& key) const { return prefix_ + normalize(key, false); }

    static std::string normalize(const std::string& key, bool allow_empty) {
        if (key.empty()) {
            if (allow_empty) return key;
            fail(ErrorCode::InvalidPath, "empty key");
        }
        if (key.front() == '/') fail(ErrorCode::InvalidPath, "absolute key: " + key);
        std::string comp;
        for (size_t i = 0; i <= key.size(); ++i) {
            if (i == key.size() || key[i] == '/') {
                if (comp == "." || comp == "..")
                    fail(ErrorCode::InvalidPath, "dot component in key: " + key);
                comp.clear();
            } else {
                comp += key[i];
            }
        }
        return key;
    }

    void del_quiet(const std::string& key) {
        try {
            del(key);
        } catch (const Error&) {
            // concurrent consumer already removed it; await result stands
        }
    }

    Backend& backend_;
    std::string prefix_;
};

} // namespace omnivault
