#pragma once

// Read-only sharing across two users' domains. Peering runs an ephemeral
// X25519 agreement over a bidirectional OOB pipe and hashes the secret to a
// 256-bit peer key. Shares are verbatim copies of encrypted blobs plus a
// control-file record carrying the file key sealed under the peer key and a
// public link to the copy. The receiver never holds the sharer's directory
// keys, so it (or anyone with its knowledge) cannot forge a blob the sharer
// would accept: the body digest lives inside the Kd-sealed header.

#include <set>
#include <sstream>

#include "hierarchy.hpp"
#include "oob.hpp"

namespace omnivault {

struct PeerContext {
    Bytes peer_key;               // 32 bytes, equal at both ends
    std::string peer_id;          // hex of first 8 bytes of H(peer ephemeral public)
    std::string peer_dir;         // "peers/<peer_id>/" inside own storage
    PublicLink own_control_link;  // handed to the peer
    PublicLink peer_control_link; // received from the peer

    std::string control_key() const { return peer_dir + "control"; }

    nlohmann::json to_json() const {
        return {{"peer_key", to_base64(peer_key)},
                {"peer_id", peer_id},
                {"peer_dir", peer_dir},
                {"own_control_link", own_control_link.to_string()},
                {"peer_control_link", peer_control_link.to_string()}};
    }

    static PeerContext from_json(const nlohmann::json& j) {
        PeerContext c;
        try {
            c.peer_key = from_base64(j.at("peer_key").get<std::string>());
            c.peer_id = j.at("peer_id").get<std::string>();
            c.peer_dir = j.at("peer_dir").get<std::string>();
            c.own_control_link = PublicLink::from_string(j.at("own_control_link").get<std::string>());
            c.peer_control_link =
                PublicLink::from_string(j.at("peer_control_link").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::MalformedMessage, std::string("peer context: ") + e.what());
        }
        if (c.peer_key.size() != 32) fail(ErrorCode::MalformedMessage, "peer key must be 32 bytes");
        return c;
    }
};

// Key agreement epilogue shared by the pipe driver and the CLI's copy-paste
// realization: derives the peer key, allocates the peer directory with an
// empty control file, and mints the link the peer will read it through.
inline PeerContext finish_key_agreement(StorageChannel& own, const EcdhKeypair& eph,
                                        BytesView peer_public) {
    PeerContext ctx;
    try {
        Bytes secret = eph.derive(peer_public);
        Digest k = hash(secret);
        ctx.peer_key.assign(k.bytes.begin(), k.bytes.end());
    } catch (const Error&) {
        fail(ErrorCode::PipeFailure, "peer sent an unusable public key");
    }
    Digest pid = hash(peer_public);
    ctx.peer_id = to_hex(BytesView(pid.bytes.data(), 8));
    ctx.peer_dir = std::string(PEERS_PREFIX) + ctx.peer_id + "/";
    own.put(ctx.control_key(), Bytes{});
    ctx.own_control_link = own.make_link(ctx.control_key());
    return ctx;
}

// Two rounds on the pipe: public keys cross, then control links cross.
inline PeerContext peer_establish(OobPipe& pipe, OobSide side, StorageChannel& own,
                                  std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
    EcdhKeypair eph = EcdhKeypair::generate();
    pipe.send(side, eph.public_raw());
    Bytes peer_public = pipe.receive(side, timeout);
    PeerContext ctx = finish_key_agreement(own, eph, peer_public);
    pipe.send(side, to_bytes(ctx.own_control_link.to_string()));
    try {
        ctx.peer_control_link = PublicLink::from_string(to_string(pipe.receive(side, timeout)));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::TimedOut) throw;
        fail(ErrorCode::PipeFailure, "peer sent an unusable control link");
    }
    return ctx;
}

// ---- control file: one canonical record per line, append-only ----

struct ShareRecord {
    std::string share_id;
    Bytes wrapped_key; // aead_seal(peer_key, Kf)
    std::string link;
};

struct ControlRecords {
    std::vector<ShareRecord> shares;
    std::set<std::string> acks;
};

inline ControlRecords parse_control(BytesView raw) {
    ControlRecords out;
    std::istringstream in(to_string(raw));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            fail(ErrorCode::MalformedMessage, "control record is not a JSON object");
        std::string kind = j.value("record", "");
        if (kind == "SHARE") {
            ShareRecord r;
            try {
                r.share_id = j.at("share_id").get<std::string>();
                r.wrapped_key = from_base64(j.at("wrapped_key").get<std::string>());
                r.link = j.at("link").get<std::string>();
            } catch (const std::exception&) {
                fail(ErrorCode::MalformedMessage, "bad SHARE record");
            }
            out.shares.push_back(std::move(r));
        } else if (kind == "ACK") {
            if (!j.contains("share_id")) fail(ErrorCode::MalformedMessage, "bad ACK record");
            out.acks.insert(j["share_id"].get<std::string>());
        } else {
            fail(ErrorCode::MalformedMessage, "unknown control record kind");
        }
    }
    return out;
}

inline void append_control(StorageChannel& own, const PeerContext& ctx, const nlohmann::json& j) {
    Bytes cur = own.exists(ctx.control_key()) ? own.get(ctx.control_key()) : Bytes{};
    std::string line = j.dump() + "\n";
    cur.insert(cur.end(), line.begin(), line.end());
    own.put(ctx.control_key(), cur);
}

inline ControlRecords own_control(StorageChannel& own, const PeerContext& ctx) {
    if (!own.exists(ctx.control_key())) return {};
    return parse_control(own.get(ctx.control_key()));
}

// ---- operations ----

// Copies the encrypted blob verbatim (no re-encryption) and appends a SHARE
// record with the file key sealed under the peer key.
inline std::string share_file(PeerContext& ctx, Hierarchy& own, const HierarchyPath& path) {
    SymmetricKey kf = own.file_key(path); // NotFound if the path is absent
    Bytes blob_raw = own.store().get(path.joined());

    std::string share_id = to_hex(random_bytes(16));
    std::string copy_key = ctx.peer_dir + share_id;
    own.store().put(copy_key, blob_raw);
    PublicLink link = own.store().make_link(copy_key);

    Bytes wrapped = aead_seal(ctx.peer_key, kf.view(), {}).serialize();
    append_control(own.store(), ctx,
                   {{"record", "SHARE"},
                    {"share_id", share_id},
                    {"wrapped_key", to_base64(wrapped)},
                    {"link", link.to_string()}});
    return share_id;
}

struct ReceivedShare {
    std::string share_id;
    Bytes plaintext;
};

// Walks the peer's control file and opens every share not yet acknowledged in
// our own control file. A tampered record fails the wrapped-key open; a
// tampered or substituted blob fails the body open — never wrong plaintext.
inline std::vector<ReceivedShare> scan_and_receive(PeerContext& ctx, StorageChannel& own) {
    ControlRecords theirs = parse_control(own.fetch_link(ctx.peer_control_link));
    std::set<std::string> acked = own_control(own, ctx).acks;

    std::vector<ReceivedShare> out;
    for (const auto& s : theirs.shares) {
        if (acked.count(s.share_id)) continue;

        Bytes kf_bytes;
        try {
            kf_bytes = aead_open(ctx.peer_key, AeadBlob::parse(s.wrapped_key), {});
        } catch (const Error&) {
            fail(ErrorCode::AuthFailure, "tampered wrapped key in SHARE record");
        }
        if (kf_bytes.size() != KEY_LEN) fail(ErrorCode::AuthFailure, "wrapped key has a bad size");
        SymmetricKey kf = SymmetricKey::from_bytes(kf_bytes);

        Bytes blob_raw = own.fetch_link(PublicLink::from_string(s.link));
        Bytes plaintext;
        try {
            plaintext = decrypt_body_with_file_key(kf, EncryptedFileBlob::parse(blob_raw));
        } catch (const Error&) {
            fail(ErrorCode::BodyMismatch, "shared blob no longer matches its file key");
        }

        append_control(own, ctx, {{"record", "ACK"}, {"share_id", s.share_id}});
        acked.insert(s.share_id);
        out.push_back({s.share_id, std::move(plaintext)});
    }
    return out;
}

// Imports a received plaintext under the receiver's own hierarchy with a
// fresh file key. The destination directory must already resolve.
inline void store_received(Hierarchy& own, const HierarchyPath& dest, BytesView plaintext) {
    if (dest.is_root()) fail(ErrorCode::InvalidPath, "expected a file path");
    SymmetricKey kd = resolve_key(own.root_key(), dest.parent(), own.store());
    own.store().put(dest.joined(), encrypt_file(kd, plaintext).serialize());
}

} // namespace omnivault
