#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <thread>

#include <omnivault/auth_pake.hpp>

using namespace omnivault;

namespace {

const Bytes DEV_B = from_hex("b1b1b1b1b1b1b1b1");

ErrorCode run_and_code(auto&& fn) {
    try {
        fn();
        return ErrorCode::CryptoFailure; // sentinel: "did not throw"
    } catch (const Error& e) {
        return e.code();
    }
}

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

// rewrites one base64 payload field of one message type in flight
struct FieldMangler : Interceptor {
    std::string msg_type, field;
    std::function<Bytes(Bytes)> fn;
    int hits = 0;
    bool on_put(const std::string& key, Bytes& data) override {
        if (!key.starts_with("messages/")) return true;
        auto j = nlohmann::json::parse(to_string(data), nullptr, false);
        if (j.is_discarded() || j.value("msg_type", "") != msg_type) return true;
        Bytes raw = from_base64(j["payload"][field].get<std::string>());
        j["payload"][field] = to_base64(fn(std::move(raw)));
        data = to_bytes(j.dump());
        ++hits;
        return true;
    }
};

} // namespace

TEST_CASE("passcode flow delivers the root key on the production group") {
    MemoryBackend backend;
    StorageChannel channel(backend);
    RootKey rk = RootKey::random();

    PakeNewDevice a(channel, DEV_B);
    PakeAuthorizer b(channel, DEV_B, rk);
    OobPipe pipe(OobDirection::A_TO_B, OobCapacity::PASSCODE_6D);

    std::jthread tb([&] { run_pake_authorizer(pipe, b); });
    RootKey got = run_pake_new_device(pipe, a);
    tb.join();

    CHECK(got == rk);
    CHECK(a.phase() == PakeAPhase::DONE);
    CHECK(b.phase() == PakeBPhase::RESPONDED);
    CHECK(b.sent_rk_material());
    CHECK(a.sigma() == b.sigma());
    CHECK(a.session_key() == b.session_key());
    CHECK(a.passcode().size() == 6);
    CHECK(backend.list("messages/").empty());
}

TEST_CASE("worked instance drives the whole exchange on a toy group") {
    SrpGroup grp = SrpGroup::toy(23, 5);
    PakeOptions oa, ob;
    oa.group = ob.group = &grp;
    oa.hook_a = 6;
    oa.hook_k = ob.hook_k = 7;
    oa.hook_x = ob.hook_x = 4;
    oa.hook_u = ob.hook_u = 2;
    ob.hook_b = 3;
    oa.pin_passcode = "000000"; // x is pinned, the code itself is inert here

    MemoryBackend backend;
    StorageChannel channel(backend);
    RootKey rk = RootKey::random();

    PakeNewDevice a(channel, DEV_B, oa);
    PakeAuthorizer b(channel, DEV_B, rk, ob);

    a.round1();
    b.round1("000000");
    a.round2();
    b.round2();
    RootKey got = a.finish();

    CHECK(a.alpha() == BigNum(8));   // 5^6 mod 23
    CHECK(b.beta() == BigNum(15));   // 7*4 + 5^3 mod 23
    CHECK(a.sigma() == BigNum(12));
    CHECK(b.sigma() == BigNum(12));
    CHECK(a.session_key() == b.session_key());
    // K_ses = first 16 bytes of H(pad(12)) with a 1-byte pad width
    Digest d = hash(from_hex("0c"));
    CHECK(a.session_key() == SymmetricKey::from_bytes(BytesView(d.bytes.data(), KEY_LEN)));
    CHECK(got == rk);
}

TEST_CASE("wrong passcode fails as a proof mismatch before any key material moves") {
    MemoryBackend backend;
    WireTap tap;
    backend.set_interceptor(&tap);
    StorageChannel channel(backend);
    RootKey rk = RootKey::random();

    PakeOptions oa;
    oa.pin_passcode = "123456";
    oa.timeout = std::chrono::milliseconds(150);
    PakeNewDevice a(channel, DEV_B, oa);
    PakeAuthorizer b(channel, DEV_B, rk);

    a.round1();
    b.round1("654321"); // mistyped
    a.round2();
    CHECK(run_and_code([&] { b.round2(); }) == ErrorCode::M1Mismatch);
    CHECK(b.phase() == PakeBPhase::FAILED);
    CHECK_FALSE(b.sent_rk_material());

    // B sent nothing after the mismatch, so A can only time out
    CHECK(run_and_code([&] { a.finish(); }) == ErrorCode::TimedOut);

    // and no m2_rk message ever crossed the channel
    for (const auto& w : tap.writes) {
        auto j = nlohmann::json::parse(to_string(w), nullptr, false);
        if (!j.is_discarded()) CHECK(j.value("msg_type", "") != "srp.m2_rk");
    }
}

TEST_CASE("typed six-digit guesses never recover the key on a wide toy group") {
    SrpGroup grp = SrpGroup::toy(2305843009213693951ULL, 37); // 2^61-1
    std::mt19937_64 rng(0xBADC0DE5);
    auto code = [&] {
        std::string s;
        for (int i = 0; i < 6; ++i) s += char('0' + rng() % 10);
        return s;
    };

    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        MemoryBackend backend;
        StorageChannel channel(backend);
        PakeOptions og;
        og.group = &grp;
        std::string truth = code();
        std::string guess = code();
        while (guess == truth) guess = code();
        og.pin_passcode = truth;

        PakeNewDevice a(channel, DEV_B, og);
        PakeOptions ob = og;
        ob.pin_passcode.reset();
        PakeAuthorizer b(channel, DEV_B, RootKey::random(), ob);

        a.round1();
        b.round1(guess);
        a.round2();
        if (run_and_code([&] { b.round2(); }) == ErrorCode::M1Mismatch && !b.sent_rk_material())
            ++mismatches;
    }
    CHECK(mismatches == 1000);
}

TEST_CASE("degenerate public values are refused") {
    MemoryBackend backend;
    StorageChannel channel(backend);
    const SrpGroup& grp = SrpGroup::production();

    SECTION("alpha multiple of N") {
        ProtocolMessage msg;
        msg.uuid = make_uuid();
        msg.msg_type = "srp.alpha";
        msg.payload["alpha"] = (grp.N + grp.N).to_hex();
        msg.reply_uuid = make_uuid();
        msg.target_device_id = DEV_B;
        channel.send_message(msg);

        PakeAuthorizer b(channel, DEV_B, RootKey::random());
        CHECK(run_and_code([&] { b.round1("123456"); }) == ErrorCode::DegenerateAlpha);
        CHECK(b.phase() == PakeBPhase::FAILED);
        CHECK(backend.list("messages/").empty()); // nothing was sent back
    }

    SECTION("beta zero") {
        PakeOptions quick;
        quick.timeout = std::chrono::milliseconds(150);
        PakeNewDevice a(channel, DEV_B, quick);
        a.round1();
        auto keys = backend.list("messages/");
        REQUIRE(keys.size() == 1);
        ProtocolMessage alpha_msg = ProtocolMessage::parse(backend.get(keys[0]));
        backend.del(keys[0]);

        ProtocolMessage forged;
        forged.uuid = alpha_msg.reply_uuid;
        forged.msg_type = "srp.beta_s";
        forged.payload["beta"] = "0";
        forged.payload["s"] = to_base64(random_bytes(16));
        forged.reply_uuid = make_uuid();
        channel.send_message(forged);

        CHECK(run_and_code([&] { a.round2(); }) == ErrorCode::DegenerateBeta);
        CHECK(a.phase() == PakeAPhase::FAILED);
    }

    SECTION("short salt is malformed") {
        PakeOptions quick;
        quick.timeout = std::chrono::milliseconds(150);
        PakeNewDevice a(channel, DEV_B, quick);
        a.round1();
        auto keys = backend.list("messages/");
        REQUIRE(keys.size() == 1);
        ProtocolMessage alpha_msg = ProtocolMessage::parse(backend.get(keys[0]));
        backend.del(keys[0]);

        ProtocolMessage forged;
        forged.uuid = alpha_msg.reply_uuid;
        forged.msg_type = "srp.beta_s";
        forged.payload["beta"] = "2";
        forged.payload["s"] = to_base64(random_bytes(15));
        forged.reply_uuid = make_uuid();
        channel.send_message(forged);

        CHECK(run_and_code([&] { a.round2(); }) == ErrorCode::MalformedMessage);
    }
}

TEST_CASE("the passcode never crosses the untrusted channel") {
    MemoryBackend backend;
    WireTap tap;
    backend.set_interceptor(&tap);
    StorageChannel channel(backend);
    RootKey rk = RootKey::random();

    PakeOptions oa;
    oa.pin_passcode = "271828";
    PakeNewDevice a(channel, DEV_B, oa);
    PakeAuthorizer b(channel, DEV_B, rk);

    a.round1();
    b.round1("271828");
    a.round2();
    b.round2();
    CHECK(a.finish() == rk);

    CHECK(tap.writes.size() == 4);
    CHECK_FALSE(wire_contains(tap, to_bytes(std::string("271828"))));
    CHECK_FALSE(wire_contains(tap, rk.view()));
    CHECK_FALSE(wire_contains(tap, a.session_key().view()));
}

TEST_CASE("in-flight tampering fails closed at the right step") {
    RootKey rk = RootKey::random();
    PakeOptions quick;
    quick.timeout = std::chrono::milliseconds(150);

    auto flip_byte = [](size_t at) {
        return [at](Bytes b) {
            b[at % b.size()] ^= 0x40;
            return b;
        };
    };

    SECTION("tampered M1 aborts B with no key material sent") {
        MemoryBackend backend;
        FieldMangler m;
        m.msg_type = "srp.m1";
        m.field = "M1";
        m.fn = flip_byte(9);
        backend.set_interceptor(&m);
        StorageChannel channel(backend);

        PakeNewDevice a(channel, DEV_B, quick);
        PakeAuthorizer b(channel, DEV_B, rk, quick);
        std::string p = a.round1();
        b.round1(p);
        a.round2();
        CHECK(run_and_code([&] { b.round2(); }) == ErrorCode::M1Mismatch);
        CHECK_FALSE(b.sent_rk_material());
        CHECK(run_and_code([&] { a.finish(); }) == ErrorCode::TimedOut);
        CHECK(m.hits == 1);
    }

    SECTION("tampered M2 aborts A before it opens the payload") {
        MemoryBackend backend;
        FieldMangler m;
        m.msg_type = "srp.m2_rk";
        m.field = "M2";
        m.fn = flip_byte(3);
        backend.set_interceptor(&m);
        StorageChannel channel(backend);

        PakeNewDevice a(channel, DEV_B, quick);
        PakeAuthorizer b(channel, DEV_B, rk, quick);
        std::string p = a.round1();
        b.round1(p);
        a.round2();
        b.round2();
        CHECK(run_and_code([&] { a.finish(); }) == ErrorCode::M2Mismatch);
        CHECK(a.phase() == PakeAPhase::FAILED);
        CHECK(m.hits == 1);
    }

    SECTION("tampered C fails authenticated decryption") {
        MemoryBackend backend;
        FieldMangler m;
        m.msg_type = "srp.m2_rk";
        m.field = "C";
        m.fn = flip_byte(20);
        backend.set_interceptor(&m);
        StorageChannel channel(backend);

        PakeNewDevice a(channel, DEV_B, quick);
        PakeAuthorizer b(channel, DEV_B, rk, quick);
        std::string p = a.round1();
        b.round1(p);
        a.round2();
        b.round2();
        CHECK(run_and_code([&] { a.finish(); }) == ErrorCode::AuthFailure);
        CHECK(m.hits == 1);
    }

    SECTION("substituted sealed key fails even under a valid M2") {
        MemoryBackend backend;
        FieldMangler m;
        m.msg_type = "srp.m2_rk";
        m.field = "C";
        m.fn = [](Bytes) {
            // the adversary seals its own key under a key it invented; M2 stays honest
            return aead_seal(SymmetricKey::random(), random_bytes(16), {}).serialize();
        };
        backend.set_interceptor(&m);
        StorageChannel channel(backend);

        PakeNewDevice a(channel, DEV_B, quick);
        PakeAuthorizer b(channel, DEV_B, rk, quick);
        std::string p = a.round1();
        b.round1(p);
        a.round2();
        b.round2();
        CHECK(run_and_code([&] { a.finish(); }) == ErrorCode::AuthFailure);
        CHECK(m.hits == 1);
    }
}

TEST_CASE("derivation pins are rejected outside test groups") {
    MemoryBackend backend;
    StorageChannel channel(backend);

    PakeOptions opts; // production group
    opts.hook_a = 6;
    PakeNewDevice a(channel, DEV_B, opts);
    CHECK(run_and_code([&] { a.round1(); }) == ErrorCode::CryptoFailure);

    PakeOptions ob;
    ob.hook_k = 7;
    ob.timeout = std::chrono::milliseconds(100);
    ProtocolMessage msg;
    msg.uuid = make_uuid();
    msg.msg_type = "srp.alpha";
    msg.payload["alpha"] = "5";
    msg.reply_uuid = make_uuid();
    msg.target_device_id = DEV_B;
    channel.send_message(msg);
    PakeAuthorizer b(channel, DEV_B, RootKey::random(), ob);
    CHECK(run_and_code([&] { b.round1("123456"); }) == ErrorCode::CryptoFailure);
}

TEST_CASE("machines are strictly one-shot") {
    MemoryBackend backend;
    StorageChannel channel(backend);

    PakeNewDevice a(channel, DEV_B);
    a.round1();
    CHECK(run_and_code([&] { a.round1(); }) == ErrorCode::CryptoFailure);
    CHECK(run_and_code([&] { a.finish(); }) == ErrorCode::CryptoFailure); // skipped round2

    PakeAuthorizer b(channel, DEV_B, RootKey::random());
    CHECK(run_and_code([&] { b.round2(); }) == ErrorCode::CryptoFailure);
}
