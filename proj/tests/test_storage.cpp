#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <thread>

#include <omnivault/storage.hpp>

using namespace omnivault;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("ov-test-" + make_uuid())) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected a typed error");
    return ErrorCode::CryptoFailure;
}

void exercise_object_ops(Backend& b) {
    StorageChannel ch(b);
    auto data = to_bytes("hello world");
    ch.put("d1/a.txt", data);
    CHECK(ch.get("d1/a.txt") == data);
    CHECK(ch.exists("d1/a.txt"));
    CHECK_FALSE(ch.exists("d1/b.txt"));

    ch.put("d1/b.txt", to_bytes("x"));
    ch.put("d2/c.txt", to_bytes("y"));
    auto keys = ch.list("d1/");
    REQUIRE(keys.size() == 2);
    CHECK(keys[0] == "d1/a.txt");
    CHECK(keys[1] == "d1/b.txt");

    // last-writer-wins
    ch.put("d1/a.txt", to_bytes("v2"));
    CHECK(ch.get("d1/a.txt") == to_bytes("v2"));

    ch.del("d1/a.txt");
    CHECK_FALSE(ch.exists("d1/a.txt"));
    CHECK(code_of([&] { ch.get("d1/a.txt"); }) == ErrorCode::NotFound);
    CHECK(code_of([&] { ch.del("d1/a.txt"); }) == ErrorCode::NotFound);
    CHECK(code_of([&] { ch.get("../escape"); }) == ErrorCode::InvalidPath);
    CHECK(code_of([&] { ch.get("/abs"); }) == ErrorCode::InvalidPath);
}

void exercise_torn_read_stress(Backend& b) {
    // interleaved writers + readers on one key; every read must be one of the
    // checksummed payloads, never a mixture
    StorageChannel ch(b);
    auto make_payload = [](uint8_t fill) {
        Bytes p(4096, fill);
        auto d = hash(p);
        p.insert(p.end(), d.bytes.begin(), d.bytes.end());
        return p;
    };
    ch.put("contended", make_payload(0));

    std::atomic<bool> stop{false};
    std::atomic<int> torn{0};
    std::vector<std::jthread> workers;
    for (int w = 0; w < 2; ++w)
        workers.emplace_back([&, w] {
            StorageChannel wch(b);
            for (uint8_t i = 1; !stop; ++i)
                wch.put("contended", make_payload(static_cast<uint8_t>(w * 100 + i % 100)));
        });
    for (int r = 0; r < 2; ++r)
        workers.emplace_back([&] {
            StorageChannel rch(b);
            while (!stop) {
                Bytes p = rch.get("contended");
                if (p.size() != 4096 + 32) {
                    ++torn;
                    continue;
                }
                Bytes body(p.begin(), p.begin() + 4096);
                if (!ct_equal(hash(body).view(), BytesView(p).subspan(4096))) ++torn;
            }
        });
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    stop = true;
    workers.clear();
    CHECK(torn == 0);
}

} // namespace

TEST_CASE("memory backend object ops") { MemoryBackend b; exercise_object_ops(b); }

TEST_CASE("local-dir backend object ops") {
    TempDir t;
    LocalDirBackend b(t.path);
    exercise_object_ops(b);
}

TEST_CASE("memory backend torn-read stress") { MemoryBackend b; exercise_torn_read_stress(b); }

TEST_CASE("local-dir backend torn-read stress") {
    TempDir t;
    LocalDirBackend b(t.path);
    exercise_torn_read_stress(b);
}

TEST_CASE("local-dir internal bookkeeping stays out of list()") {
    TempDir t;
    LocalDirBackend b(t.path);
    StorageChannel ch(b);
    ch.put("f", to_bytes("1"));
    ch.make_link("f");
    auto keys = ch.list("");
    REQUIRE(keys.size() == 1);
    CHECK(keys[0] == "f");
}

TEST_CASE("uuid shape") {
    auto u = make_uuid();
    REQUIRE(u.size() == 36);
    CHECK(u[8] == '-');
    CHECK(u[13] == '-');
    CHECK(u[14] == '4');
    CHECK((u[19] == '8' || u[19] == '9' || u[19] == 'a' || u[19] == 'b'));
    CHECK(make_uuid() != make_uuid());
}

TEST_CASE("message send/await round trip") {
    MemoryBackend b;
    StorageChannel ch(b);

    ProtocolMessage m;
    m.uuid = make_uuid();
    m.msg_type = "auth1.pk";
    m.payload["PK_A"] = to_base64(to_bytes("fake-key"));
    m.reply_uuid = make_uuid();
    m.target_device_id = random_bytes(16);

    ch.send_message(m);
    CHECK(ch.exists(m.object_key()));

    auto got = ch.await_message_for_device(m.target_device_id, 1000ms);
    CHECK(got.uuid == m.uuid);
    CHECK(got.msg_type == m.msg_type);
    CHECK(got.payload == m.payload);
    CHECK(got.reply_uuid == m.reply_uuid);
    // consumed after successful await
    CHECK_FALSE(ch.exists(m.object_key()));

    SECTION("await by exact uuid") {
        ProtocolMessage r;
        r.uuid = m.reply_uuid;
        r.msg_type = "auth1.resp";
        r.payload["M1"] = "aa";
        ch.send_message(r);
        auto got2 = ch.await_message(r.uuid, 1000ms);
        CHECK(got2.msg_type == "auth1.resp");
        CHECK_FALSE(ch.exists(r.object_key()));
    }
}

TEST_CASE("await of absent uuid times out") {
    MemoryBackend b;
    StorageChannel ch(b);
    auto t0 = std::chrono::steady_clock::now();
    CHECK(code_of([&] { ch.await_message(make_uuid(), 100ms); }) == ErrorCode::TimedOut);
    auto dt = std::chrono::steady_clock::now() - t0;
    CHECK(dt >= 100ms);
    CHECK(dt < 2000ms);
}

TEST_CASE("await is cancellable via stop token") {
    MemoryBackend b;
    StorageChannel ch(b);
    std::stop_source src;
    auto t0 = std::chrono::steady_clock::now();
    std::jthread canceller([&] {
        std::this_thread::sleep_for(50ms);
        src.request_stop();
    });
    CHECK(code_of([&] { ch.await_message(make_uuid(), 30000ms, src.get_token()); }) ==
          ErrorCode::TimedOut);
    CHECK(std::chrono::steady_clock::now() - t0 < 5000ms);
}

TEST_CASE("malformed and mismatched messages are typed errors") {
    MemoryBackend b;
    StorageChannel ch(b);

    SECTION("garbage body") {
        auto u = make_uuid();
        ch.put(std::string(MESSAGES_PREFIX) + u, to_bytes("{not json"));
        CHECK(code_of([&] { ch.await_message(u, 500ms); }) == ErrorCode::MalformedMessage);
    }
    SECTION("missing fields") {
        auto u = make_uuid();
        ch.put(std::string(MESSAGES_PREFIX) + u, to_bytes("{\"uuid\":\"" + u + "\"}"));
        CHECK(code_of([&] { ch.await_message(u, 500ms); }) == ErrorCode::MalformedMessage);
    }
    SECTION("uuid field disagrees with filename") {
        ProtocolMessage m;
        m.uuid = make_uuid();
        m.msg_type = "srp.alpha";
        auto lying_key = std::string(MESSAGES_PREFIX) + make_uuid();
        ch.put(lying_key, m.serialize());
        CHECK(code_of([&] {
                  ch.await_message(lying_key.substr(std::string(MESSAGES_PREFIX).size()), 500ms);
              }) == ErrorCode::MalformedMessage);
    }
}

TEST_CASE("interceptor sees and may rewrite traffic") {
    struct Rewriter : Interceptor {
        int puts = 0, gets = 0;
        bool on_put(const std::string& key, Bytes& data) override {
            ++puts;
            if (key.find("messages/") != std::string::npos) {
                auto m = ProtocolMessage::parse(data);
                m.payload["alpha"] = "00";
                data = m.serialize();
            }
            return true;
        }
        void on_get(const std::string&, Bytes&) override { ++gets; }
    } hook;

    MemoryBackend b;
    b.set_interceptor(&hook);
    StorageChannel ch(b);

    ProtocolMessage m;
    m.uuid = make_uuid();
    m.msg_type = "srp.alpha";
    m.payload["alpha"] = "1234";
    ch.send_message(m);
    auto got = ch.await_message(m.uuid, 1000ms);
    CHECK(got.payload["alpha"] == "00"); // channel gives no integrity
    CHECK(hook.puts >= 1);
    CHECK(hook.gets >= 1);

    SECTION("dropped writes never appear") {
        struct Dropper : Interceptor {
            bool on_put(const std::string&, Bytes&) override { return false; }
        } dropper;
        b.set_interceptor(&dropper);
        ch.put("x", to_bytes("1"));
        b.set_interceptor(nullptr);
        CHECK_FALSE(ch.exists("x"));
    }
}

TEST_CASE("public links") {
    MemoryBackend b;
    StorageChannel ch(b);
    ch.put("d1/file", to_bytes("ciphertext"));

    auto link = ch.make_link("d1/file");
    REQUIRE(link.token.size() == 16);
    CHECK(ch.fetch_link(link) == to_bytes("ciphertext"));

    SECTION("random token is invalid") {
        PublicLink bogus{random_bytes(16), b.locator()};
        CHECK(code_of([&] { ch.fetch_link(bogus); }) == ErrorCode::InvalidLink);
    }
    SECTION("link survives overwrite and returns fresh bytes") {
        ch.put("d1/file", to_bytes("v2"));
        CHECK(ch.fetch_link(link) == to_bytes("v2"));
    }
    SECTION("tokens are not enumerable via list") {
        for (auto& k : ch.list("")) CHECK(k.find(to_hex(link.token)) == std::string::npos);
    }
    SECTION("string round trip") {
        auto s = link.to_string();
        auto back = PublicLink::from_string(s);
        CHECK(back.token == link.token);
        CHECK(back.locator == link.locator);
        CHECK(code_of([&] { PublicLink::from_string("garbage"); }) == ErrorCode::InvalidLink);
    }
    SECTION("cross-channel fetch through a different user's view") {
        StorageChannel other(b, "u/bob");
        CHECK(other.fetch_link(link) == to_bytes("ciphertext"));
    }
}

TEST_CASE("cross-backend link fetch (two local roots)") {
    TempDir ta, tb;
    LocalDirBackend alice(ta.path);
    StorageChannel cha(alice);
    cha.put("peers/p1/blob", to_bytes("shared-bytes"));
    auto link = cha.make_link("peers/p1/blob");

    LocalDirBackend bob(tb.path);
    StorageChannel chb(bob);
    CHECK(chb.fetch_link(link) == to_bytes("shared-bytes"));
}

TEST_CASE("latency injection changes timing only") {
    MemoryBackend b;
    b.set_latency(20ms);
    StorageChannel ch(b);
    auto t0 = std::chrono::steady_clock::now();
    ch.put("k", to_bytes("v"));
    CHECK(ch.get("k") == to_bytes("v"));
    CHECK(std::chrono::steady_clock::now() - t0 >= 40ms);
}

TEST_CASE("channel prefixes isolate users on one backend") {
    MemoryBackend b;
    StorageChannel alice(b, "u/alice");
    StorageChannel bob(b, "u/bob");
    alice.put("f", to_bytes("a"));
    bob.put("f", to_bytes("b"));
    CHECK(alice.get("f") == to_bytes("a"));
    CHECK(bob.get("f") == to_bytes("b"));
    CHECK(alice.list("").size() == 1);
}
