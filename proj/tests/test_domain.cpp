#include <catch2/catch_amalgamated.hpp>

#include <omnivault/domain.hpp>

using namespace omnivault;

namespace {
ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected a typed error");
    return ErrorCode::CryptoFailure;
}

DeviceMeta desktop() {
    return DeviceMeta::fresh("desktop", {Capability::DISPLAY, Capability::CAMERA,
                                         Capability::KEYBOARD});
}
} // namespace

TEST_CASE("init_domain creates a one-record descriptor that self-verifies") {
    MemoryBackend b;
    StorageChannel store(b);
    auto r = init_domain(desktop(), store);

    REQUIRE(r.descriptor.records.size() == 1);
    const auto& rec = r.descriptor.records[0];
    CHECK(rec.name == "desktop");
    CHECK(rec.device_id.size() == 16);
    CHECK(rec.verify(r.auth_key));
    CHECK_FALSE(rec.verify(AuthKey::random()));

    CHECK(load_root_key(r.descriptor, rec.device_id, r.keypair, r.auth_key) == r.root_key);
    CHECK(store.exists("omnishare.domain"));

    SECTION("second init → DomainExists") {
        CHECK(code_of([&] { init_domain(desktop(), store); }) == ErrorCode::DomainExists);
    }
    SECTION("persisted descriptor parses back identically") {
        CHECK(load_descriptor(store) == r.descriptor);
    }
}

TEST_CASE("register_self adds a verifying record whose wrapped RK round-trips") {
    MemoryBackend b;
    StorageChannel store(b);
    auto init = init_domain(desktop(), store);

    auto meta = DeviceMeta::fresh("phone", {Capability::DISPLAY});
    auto kp = DeviceKeypair::generate();
    auto ak = AuthKey::random();
    auto d2 = register_self(init.descriptor, init.root_key, meta, kp, ak);

    REQUIRE(d2.records.size() == 2);
    CHECK(load_root_key(d2, meta.device_id, kp, ak) == init.root_key);
    CHECK(asym_unwrap(kp, d2.records[1].wrapped_rk) == init.root_key);

    SECTION("duplicate device_id → DuplicateDeviceId") {
        CHECK(code_of([&] { register_self(d2, init.root_key, meta, kp, ak); }) ==
              ErrorCode::DuplicateDeviceId);
    }
    SECTION("tampered wrapped_rk fails record verification") {
        auto tampered = d2;
        tampered.records[1].wrapped_rk[7] ^= 1;
        CHECK_FALSE(tampered.records[1].verify(ak));
        CHECK(code_of([&] { load_root_key(tampered, meta.device_id, kp, ak); }) ==
              ErrorCode::MacMismatch);
    }
    SECTION("unknown device → RecordNotFound") {
        CHECK(code_of([&] { load_root_key(d2, random_bytes(16), kp, ak); }) ==
              ErrorCode::RecordNotFound);
    }
}

TEST_CASE("wrapped_rk swap between records trips both devices' MACs") {
    MemoryBackend b;
    StorageChannel store(b);
    auto init = init_domain(desktop(), store);
    auto meta = DeviceMeta::fresh("phone", {Capability::DISPLAY});
    auto kp = DeviceKeypair::generate();
    auto ak = AuthKey::random();
    auto d2 = register_self(init.descriptor, init.root_key, meta, kp, ak);

    std::swap(d2.records[0].wrapped_rk, d2.records[1].wrapped_rk);
    CHECK(code_of([&] {
              load_root_key(d2, d2.records[0].device_id, init.keypair, init.auth_key);
          }) == ErrorCode::MacMismatch);
    CHECK(code_of([&] { load_root_key(d2, meta.device_id, kp, ak); }) == ErrorCode::MacMismatch);
}

TEST_CASE("adversarial record injection leaves other devices unaffected") {
    MemoryBackend b;
    StorageChannel store(b);
    auto init = init_domain(desktop(), store);

    // adversary appends its own record with its own key material
    auto evil_kp = DeviceKeypair::generate();
    auto evil = make_record(DeviceMeta::fresh("evil", {Capability::DISPLAY}),
                            evil_kp.public_der(), asym_wrap(evil_kp, RootKey::random()),
                            AuthKey::random());
    auto d = init.descriptor;
    d.records.push_back(evil);

    CHECK(load_root_key(d, d.records[0].device_id, init.keypair, init.auth_key) ==
          init.root_key);
}

TEST_CASE("descriptor canonical serialization") {
    // logical equality ⇒ byte equality: capability insertion order must not matter
    auto kp = DeviceKeypair::generate();
    auto ak = AuthKey::random();
    auto rk = RootKey::random();
    DeviceMeta m1{"dev", random_bytes(16), {Capability::KEYBOARD, Capability::DISPLAY}};
    DeviceMeta m2 = m1;
    m2.capabilities = {Capability::DISPLAY, Capability::KEYBOARD};
    auto wrapped = asym_wrap(kp, rk);
    CHECK(make_record(m1, kp.public_der(), wrapped, ak).serialize() ==
          make_record(m2, kp.public_der(), wrapped, ak).serialize());

    SECTION("parse ∘ serialize = id over randomized descriptors") {
        for (int i = 0; i < 50; ++i) {
            DomainDescriptor d;
            d.domain_id = random_bytes(16);
            int nrec = 1 + i % 3;
            for (int j = 0; j < nrec; ++j) {
                DeviceRecord r;
                r.name = "device-" + std::to_string(j) + std::string(i % 7, 'x');
                r.device_id = random_bytes(16);
                for (int c = 1; c <= 6; ++c)
                    if ((i + j + c) % 3 == 0) r.capabilities.insert(static_cast<Capability>(c));
                r.public_key = random_bytes(30 + i);
                r.wrapped_rk = random_bytes(256);
                r.record_mac = random_bytes(32);
                d.records.push_back(r);
            }
            Bytes ser = d.serialize();
            CHECK(DomainDescriptor::parse(ser) == d);
            CHECK(DomainDescriptor::parse(ser).serialize() == ser);
        }
    }
    SECTION("malformed descriptors are typed errors") {
        DomainDescriptor d;
        d.domain_id = random_bytes(16);
        Bytes ser = d.serialize();
        ser.push_back(0); // trailing byte
        CHECK(code_of([&] { DomainDescriptor::parse(ser); }) == ErrorCode::MalformedBlob);
        CHECK(code_of([&] { DomainDescriptor::parse(Bytes(10, 0)); }) == ErrorCode::MalformedBlob);
    }
}

TEST_CASE("protocol selection table and preference order") {
    using enum Capability;
    auto choice = [](CapabilitySet n, CapabilitySet a) { return select_protocol(n, a); };

    CHECK(choice({DISPLAY}, {CAMERA, KEYBOARD}) ==
          ProtocolChoice{ProtocolKind::SINGLE_ROUND_TRIP, OobKind::QR});
    CHECK(choice({SPEAKER}, {MICROPHONE}) ==
          ProtocolChoice{ProtocolKind::SINGLE_ROUND_TRIP, OobKind::ULTRASOUND});
    CHECK(choice({DISPLAY}, {KEYBOARD}).kind == ProtocolKind::MULTI_ROUND_TRIP);

    // QR beats ultrasound beats passcode when several pairings are viable
    CHECK(choice({DISPLAY, SPEAKER}, {CAMERA, MICROPHONE, KEYBOARD}).oob == OobKind::QR);
    CHECK(choice({DISPLAY, SPEAKER}, {MICROPHONE, KEYBOARD}) ==
          ProtocolChoice{ProtocolKind::SINGLE_ROUND_TRIP, OobKind::ULTRASOUND});

    CHECK(code_of([&] { choice({SPEAKER}, {CAMERA}); }) == ErrorCode::NoViableChannel);
    CHECK(code_of([&] { choice({NFC}, {NFC}); }) == ErrorCode::NoViableChannel);
}
