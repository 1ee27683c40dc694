#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <thread>

#include <omnivault/auth_single.hpp>

using namespace omnivault;

namespace {

const Bytes DEV_A = from_hex("0a0a0a0a0a0a0a0a");
const Bytes DEV_B = from_hex("0b0b0b0b0b0b0b0b");

ErrorCode run_and_code(auto&& fn) {
    try {
        fn();
        return ErrorCode::CryptoFailure; // sentinel: "did not throw"
    } catch (const Error& e) {
        return e.code();
    }
}

// records every byte that crosses the untrusted channel
struct WireTap : Interceptor {
    std::mutex m;
    std::vector<Bytes> writes;
    bool on_put(const std::string&, Bytes& data) override {
        std::lock_guard lk(m);
        writes.push_back(data);
        return true;
    }
};

bool wire_contains(const WireTap& tap, BytesView needle) {
    for (const auto& w : tap.writes) {
        auto it = std::search(w.begin(), w.end(), needle.begin(), needle.end());
        if (it != w.end()) return true;
    }
    return false;
}

} // namespace

TEST_CASE("single round-trip delivers the root key") {
    MemoryBackend backend;
    StorageChannel channel(backend);
    RootKey rk = RootKey::random();

    SingleNewDevice a(channel, DEV_B);
    SingleAuthorizer b(channel, DEV_B, rk);
    OobPipe pipe(OobDirection::A_TO_B, OobCapacity::QR_48B);

    RootKey got{};
    std::jthread tb([&] { run_single_authorizer(pipe, b); });
    got = run_single_new_device(pipe, a);
    tb.join();

    CHECK(got == rk);
    CHECK(a.phase() == SingleAPhase::DONE);
    CHECK(b.phase() == SingleBPhase::RESPONDED);
    CHECK(b.received_pk_der() == a.sent_pk_der());
    // consumed messages are deleted from the store
    CHECK(backend.list("messages/").empty());
}

TEST_CASE("OOB payload binds the public key and survives rendering") {
    MemoryBackend backend;
    StorageChannel channel(backend);
    SingleNewDevice a(channel, DEV_B);

    OobPayloadSingle payload = a.start();
    CHECK(payload.pk_digest == hash(a.sent_pk_der()));
    CHECK(payload.session_auth_key == a.k_sauth());

    OobPayloadSingle round = parse_oob_string(render_oob_string(payload));
    CHECK(round.pk_digest == payload.pk_digest);
    CHECK(round.session_auth_key == payload.session_auth_key);

    // the initial message lands under the authorizer's inbox path
    auto keys = backend.list("messages/");
    REQUIRE(keys.size() == 1);
    CHECK(keys[0].starts_with("messages/" + to_hex(DEV_B) + "/"));
}

TEST_CASE("session auth key is fresh per run and never crosses the channel") {
    MemoryBackend backend;
    WireTap tap;
    backend.set_interceptor(&tap);
    StorageChannel channel(backend);
    RootKey rk = RootKey::random();

    SymmetricKey k1, k2;
    for (int run = 0; run < 2; ++run) {
        SingleNewDevice a(channel, DEV_B);
        SingleAuthorizer b(channel, DEV_B, rk);
        OobPipe pipe(OobDirection::A_TO_B, OobCapacity::QR_48B);
        std::jthread tb([&] { run_single_authorizer(pipe, b); });
        RootKey got = run_single_new_device(pipe, a);
        tb.join();
        REQUIRE(got == rk);
        (run == 0 ? k1 : k2) = a.k_sauth();
    }
    CHECK(!(k1 == k2));
    CHECK_FALSE(wire_contains(tap, k1.view()));
    CHECK_FALSE(wire_contains(tap, k2.view()));
    CHECK_FALSE(wire_contains(tap, to_bytes(to_base64(Bytes(k1.bytes.begin(), k1.bytes.end())))));
    CHECK_FALSE(wire_contains(tap, to_bytes(to_hex(Bytes(k1.bytes.begin(), k1.bytes.end())))));
    // and the root key itself only ever travels wrapped
    CHECK_FALSE(wire_contains(tap, rk.view()));
}

TEST_CASE("substituted public key is refused before any response exists") {
    struct PkSwap : Interceptor {
        Bytes evil_der;
        bool on_put(const std::string& key, Bytes& data) override {
            if (!key.starts_with("messages/")) return true;
            auto j = nlohmann::json::parse(to_string(data), nullptr, false);
            if (j.is_discarded() || j.value("msg_type", "") != "auth1.pk") return true;
            j["payload"]["PK_A"] = to_base64(evil_der);
            data = to_bytes(j.dump());
            return true;
        }
    };

    MemoryBackend backend;
    PkSwap swap;
    swap.evil_der = DeviceKeypair::generate().public_der();
    backend.set_interceptor(&swap);
    StorageChannel channel(backend);
    RootKey rk = RootKey::random();

    SingleNewDevice a(channel, DEV_B);
    SingleAuthorizer b(channel, DEV_B, rk);

    OobPayloadSingle payload = a.start();
    b.receive_oob(payload);
    CHECK(run_and_code([&] { b.respond(); }) == ErrorCode::DigestMismatch);
    CHECK(b.phase() == SingleBPhase::FAILED);

    // nothing was sent back: A can only time out
    SingleOptions quick;
    quick.timeout = std::chrono::milliseconds(150);
    SingleNewDevice a2(channel, DEV_B, DeviceKeypair::generate(), quick);
    OobPayloadSingle p2 = a2.start();
    SingleAuthorizer b2(channel, DEV_B, rk); // fresh machine, same swapped channel
    b2.receive_oob(p2);
    CHECK(run_and_code([&] { b2.respond(); }) == ErrorCode::DigestMismatch);
    CHECK(run_and_code([&] { a2.finish(); }) == ErrorCode::TimedOut);
    CHECK(a2.phase() == SingleAPhase::FAILED);
}

TEST_CASE("replayed initial message from an old session is refused") {
    MemoryBackend backend;
    StorageChannel channel(backend);
    RootKey rk = RootKey::random();

    // session 1 runs honestly; the adversary keeps a copy of the PK message
    SingleNewDevice a1(channel, DEV_B);
    OobPayloadSingle p1 = a1.start();
    auto keys = backend.list("messages/");
    REQUIRE(keys.size() == 1);
    ProtocolMessage replay = ProtocolMessage::parse(backend.get(keys[0]));
    replay.target_device_id = DEV_B;
    SingleAuthorizer b1(channel, DEV_B, rk);
    b1.receive_oob(p1);
    b1.respond();
    REQUIRE(a1.finish() == rk);

    // session 2: B expects a fresh key, adversary replays the captured message
    SingleNewDevice a2(channel, DEV_B);
    OobPayloadSingle p2 = a2.start();
    SingleAuthorizer b2(channel, DEV_B, rk);
    b2.receive_oob(p2);
    CHECK(run_and_code([&] { b2.respond_to(replay); }) == ErrorCode::DigestMismatch);
    CHECK(b2.phase() == SingleBPhase::FAILED);
}

TEST_CASE("injected wrapped keys are rejected across a thousand trials") {
    MemoryBackend backend;
    StorageChannel channel(backend);
    DeviceKeypair kp = DeviceKeypair::generate(); // hoisted: trials share A's identity

    SingleOptions quick;
    quick.timeout = std::chrono::milliseconds(200);

    std::mt19937_64 rng(0xD1CE);
    int accepted = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        SingleNewDevice a(channel, DEV_B, kp, quick);
        a.start();

        // adversary knows PK_A from the channel and wraps its own key under it,
        // but cannot produce the MAC without K_SAuth
        SymmetricKey rk_evil = SymmetricKey::random();
        Bytes m1 = asym_wrap(a.sent_pk_der(), rk_evil);
        SymmetricKey mac_guess = SymmetricKey::random();
        Bytes m2 = hmac(mac_guess, m1);
        if (trial % 3 == 0) { // sometimes just flip bits in a structurally valid MAC
            m2 = hmac(SymmetricKey::random(), m1);
            m2[rng() % m2.size()] ^= uint8_t(1 + rng() % 255);
        }

        auto pending = backend.list("messages/");
        REQUIRE(pending.size() == 1);
        ProtocolMessage pk_msg = ProtocolMessage::parse(backend.get(pending[0]));
        backend.del(pending[0]);

        ProtocolMessage forged;
        forged.uuid = pk_msg.reply_uuid;
        forged.msg_type = "auth1.resp";
        forged.payload["M1"] = to_base64(m1);
        forged.payload["M2"] = to_base64(m2);
        channel.send_message(forged);

        try {
            a.finish();
            ++accepted;
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::MacMismatch);
            CHECK(a.phase() == SingleAPhase::FAILED);
        }
    }
    CHECK(accepted == 0);
}

TEST_CASE("bit-flipped response MAC fails closed") {
    struct MacFlip : Interceptor {
        bool on_put(const std::string& key, Bytes& data) override {
            if (!key.starts_with("messages/")) return true;
            auto j = nlohmann::json::parse(to_string(data), nullptr, false);
            if (j.is_discarded() || j.value("msg_type", "") != "auth1.resp") return true;
            Bytes m2 = from_base64(j["payload"]["M2"].get<std::string>());
            m2[5] ^= 0x20;
            j["payload"]["M2"] = to_base64(m2);
            data = to_bytes(j.dump());
            return true;
        }
    };

    MemoryBackend backend;
    MacFlip flip;
    backend.set_interceptor(&flip);
    StorageChannel channel(backend);
    RootKey rk = RootKey::random();

    SingleNewDevice a(channel, DEV_B);
    SingleAuthorizer b(channel, DEV_B, rk);
    OobPipe pipe(OobDirection::A_TO_B, OobCapacity::QR_48B);

    std::jthread tb([&] { run_single_authorizer(pipe, b); });
    CHECK(run_and_code([&] { run_single_new_device(pipe, a); }) == ErrorCode::MacMismatch);
    tb.join();
    CHECK(a.phase() == SingleAPhase::FAILED);
    CHECK(b.phase() == SingleBPhase::RESPONDED); // B acted honestly
}

TEST_CASE("unanswered runs time out with a typed error") {
    MemoryBackend backend;
    StorageChannel channel(backend);
    SingleOptions quick;
    quick.timeout = std::chrono::milliseconds(120);

    SingleNewDevice a(channel, DEV_B, DeviceKeypair::generate(), quick);
    a.start();
    CHECK(run_and_code([&] { a.finish(); }) == ErrorCode::TimedOut);
    CHECK(a.phase() == SingleAPhase::FAILED);

    MemoryBackend empty_backend;
    StorageChannel empty_channel(empty_backend);
    SingleAuthorizer b(empty_channel, DEV_B, RootKey::random(), quick);
    OobPayloadSingle synthetic{Digest{}, SymmetricKey::random()};
    b.receive_oob(synthetic);
    CHECK(run_and_code([&] { b.respond(); }) == ErrorCode::TimedOut);
    CHECK(b.phase() == SingleBPhase::FAILED);
}
