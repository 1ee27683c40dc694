#pragma once

// Domain descriptor lock-box: one cleartext file at the storage root holding
// a record per authorized device — name, id, capabilities, public key, RK
// wrapped under that key — each record MAC'd under the owning device's local
// AuthKey. The descriptor as a whole is untrusted input; per-record MACs let
// a device detect tampering of its own entry.

#include <set>

#include "crypto.hpp"
#include "hierarchy.hpp"
#include "storage.hpp"

namespace omnivault {

using RootKey = SymmetricKey;
using AuthKey = SymmetricKey;

enum class Capability : uint8_t {
    DISPLAY = 1,
    CAMERA = 2,
    KEYBOARD = 3,
    SPEAKER = 4,
    MICROPHONE = 5,
    NFC = 6,
};

using CapabilitySet = std::set<Capability>;

inline const char* capability_name(Capability c) {
    switch (c) {
    case Capability::DISPLAY:    return "DISPLAY";
    case Capability::CAMERA:     return "CAMERA";
    case Capability::KEYBOARD:   return "KEYBOARD";
    case Capability::SPEAKER:    return "SPEAKER";
    case Capability::MICROPHONE: return "MICROPHONE";
    case Capability::NFC:        return "NFC";
    }
    return "?";
}

inline Capability capability_from_name(const std::string& s) {
    for (auto c : {Capability::DISPLAY, Capability::CAMERA, Capability::KEYBOARD,
                   Capability::SPEAKER, Capability::MICROPHONE, Capability::NFC})
        if (s == capability_name(c)) return c;
    fail(ErrorCode::MalformedBlob, "unknown capability " + s);
}

struct DeviceMeta {
    std::string name;
    Bytes device_id; // 16 bytes
    CapabilitySet capabilities;

    static DeviceMeta fresh(std::string name, CapabilitySet caps) {
        return DeviceMeta{std::move(name), random_bytes(16), std::move(caps)};
    }
};

struct DeviceRecord {
    std::string name;
    Bytes device_id;
    CapabilitySet capabilities;
    Bytes public_key; // SubjectPublicKeyInfo DER
    Bytes wrapped_rk;
    Bytes record_mac; // HMAC(AuthKey, canonical body)

    // Canonical body: lp(name) ‖ lp(device_id) ‖ u8 count ‖ sorted cap bytes ‖
    // lp(public_key) ‖ lp(wrapped_rk). std::set iteration is already sorted.
    Bytes body() const {
        Bytes out;
        put_lp(out, to_bytes(name));
        put_lp(out, device_id);
        out.push_back(static_cast<uint8_t>(capabilities.size()));
        for (auto c : capabilities) out.push_back(static_cast<uint8_t>(c));
        put_lp(out, public_key);
        put_lp(out, wrapped_rk);
        return out;
    }

    Bytes serialize() const {
        Bytes out = body();
        put_lp(out, record_mac);
        return out;
    }

    static DeviceRecord parse(ByteReader& r) {
        DeviceRecord rec;
        rec.name = to_string(r.lp());
        rec.device_id = r.lp();
        if (rec.device_id.size() != 16) fail(ErrorCode::MalformedBlob, "device_id must be 16 bytes");
        uint8_t n = r.u8();
        int prev = 0;
        for (uint8_t i = 0; i < n; ++i) {
            uint8_t v = r.u8();
            if (v < 1 || v > 6) fail(ErrorCode::MalformedBlob, "unknown capability byte");
            if (v <= prev) fail(ErrorCode::MalformedBlob, "capability bytes must be strictly increasing");
            prev = v;
            rec.capabilities.insert(static_cast<Capability>(v));
        }
        rec.public_key = r.lp();
        rec.wrapped_rk = r.lp();
        rec.record_mac = r.lp();
        if (rec.record_mac.size() != DIGEST_LEN)
            fail(ErrorCode::MalformedBlob, "record_mac must be 32 bytes");
        return rec;
    }

    bool verify(const AuthKey& auth_key) const { return ct_equal(hmac(auth_key, body()), record_mac); }

    bool operator==(const DeviceRecord&) const = default;
};

inline DeviceRecord make_record(const DeviceMeta& meta, BytesView public_key_der,
                                BytesView wrapped_rk, const AuthKey& auth_key) {
    DeviceRecord rec;
    rec.name = meta.name;
    rec.device_id = meta.device_id;
    rec.capabilities = meta.capabilities;
    rec.public_key.assign(public_key_der.begin(), public_key_der.end());
    rec.wrapped_rk.assign(wrapped_rk.begin(), wrapped_rk.end());
    rec.record_mac = hmac(auth_key, rec.body());
    return rec;
}

struct DomainDescriptor {
    Bytes domain_id; // 16 bytes
    std::vector<DeviceRecord> records;

    Bytes serialize() const {
        Bytes out = domain_id;
        put_u32be(out, static_cast<uint32_t>(records.size()));
        for (auto& r : records) {
            Bytes rb = r.serialize();
            out.insert(out.end(), rb.begin(), rb.end());
        }
        return out;
    }

    static DomainDescriptor parse(BytesView raw) {
        ByteReader r(raw);
        DomainDescriptor d;
        d.domain_id = r.take(16);
        uint32_t n = r.u32be();
        for (uint32_t i = 0; i < n; ++i) d.records.push_back(DeviceRecord::parse(r));
        if (!r.done()) fail(ErrorCode::MalformedBlob, "trailing bytes after descriptor");
        return d;
    }

    const DeviceRecord* find(BytesView device_id) const {
        for (auto& r : records)
            if (std::equal(r.device_id.begin(), r.device_id.end(), device_id.begin(),
                           device_id.end()))
                return &r;
        return nullptr;
    }

    bool operator==(const DomainDescriptor&) const = default;
};

inline void save_descriptor(StorageChannel& store, const DomainDescriptor& d) {
    store.put(DESCRIPTOR_NAME, d.serialize());
}

inline DomainDescriptor load_descriptor(StorageChannel& store) {
    if (!store.exists(DESCRIPTOR_NAME)) fail(ErrorCode::NotFound, "no domain descriptor");
    return DomainDescriptor::parse(store.get(DESCRIPTOR_NAME));
}

struct InitResult {
    DomainDescriptor descriptor;
    RootKey root_key;
    AuthKey auth_key;
    DeviceKeypair keypair;
};

inline InitResult init_domain(const DeviceMeta& meta, StorageChannel& store) {
    if (store.exists(DESCRIPTOR_NAME)) fail(ErrorCode::DomainExists, "descriptor already present");
    InitResult r;
    r.root_key = RootKey::random();
    r.auth_key = AuthKey::random();
    r.keypair = DeviceKeypair::generate();
    r.descriptor.domain_id = random_bytes(16);
    r.descriptor.records.push_back(
        make_record(meta, r.keypair.public_der(), asym_wrap(r.keypair, r.root_key), r.auth_key));
    save_descriptor(store, r.descriptor);
    return r;
}

// Post-authorization self-registration: the NEW device adds its own record.
inline DomainDescriptor register_self(DomainDescriptor descriptor, const RootKey& rk,
                                      const DeviceMeta& meta, const DeviceKeypair& keypair,
                                      const AuthKey& auth_key) {
    if (descriptor.find(meta.device_id)) fail(ErrorCode::DuplicateDeviceId, to_hex(meta.device_id));
    descriptor.records.push_back(
        make_record(meta, keypair.public_der(), asym_wrap(keypair, rk), auth_key));
    return descriptor;
}

inline RootKey load_root_key(const DomainDescriptor& descriptor, BytesView device_id,
                             const DeviceKeypair& keypair, const AuthKey& auth_key) {
    const DeviceRecord* rec = descriptor.find(device_id);
    if (!rec) fail(ErrorCode::RecordNotFound, to_hex(device_id));
    if (!rec->verify(auth_key))
        fail(ErrorCode::MacMismatch, "descriptor record tampered for this device");
    return asym_unwrap(keypair, rec->wrapped_rk);
}

// ---- capability-driven protocol selection ----

enum class ProtocolKind { SINGLE_ROUND_TRIP, MULTI_ROUND_TRIP };
enum class OobKind { QR, ULTRASOUND };

struct ProtocolChoice {
    ProtocolKind kind;
    OobKind oob; // meaningful for SINGLE_ROUND_TRIP only

    bool operator==(const ProtocolChoice&) const = default;
};

// Preference: QR > ULTRASOUND > MULTI.
inline ProtocolChoice select_protocol(const CapabilitySet& caps_new,
                                      const CapabilitySet& caps_auth) {
    auto has = [](const CapabilitySet& s, Capability c) { return s.count(c) > 0; };
    if (has(caps_new, Capability::DISPLAY) && has(caps_auth, Capability::CAMERA))
        return {ProtocolKind::SINGLE_ROUND_TRIP, OobKind::QR};
    if (has(caps_new, Capability::SPEAKER) && has(caps_auth, Capability::MICROPHONE))
        return {ProtocolKind::SINGLE_ROUND_TRIP, OobKind::ULTRASOUND};
    if (has(caps_new, Capability::DISPLAY) && has(caps_auth, Capability::KEYBOARD))
        return {ProtocolKind::MULTI_ROUND_TRIP, OobKind::QR};
    fail(ErrorCode::NoViableChannel, "no capability pairing supports an OOB channel");
}

} // namespace omnivault
