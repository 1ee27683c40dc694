#pragma once

// Directory-keyed encryption tree. Every directory key travels in a
// path-bound envelope sealed under its parent's key; every file is sealed
// under a fresh file key whose header (tag ‖ body digest ‖ key) is sealed
// under the directory key and prepended to the body. The 1-byte tag and the
// embedded digests are what defeat key-substitution and splice attacks.

#include "crypto.hpp"
#include "storage.hpp"

namespace omnivault {

enum class KeyTag : uint8_t { DIRKEY = 0x01, FILEKEY = 0x02 };

static constexpr const char* ENVELOPE_NAME = ".omnishare.envelope";
static constexpr const char* DESCRIPTOR_NAME = "omnishare.domain";

static constexpr size_t ENVELOPE_PT_LEN = 1 + DIGEST_LEN + KEY_LEN;        // 49
static constexpr size_t ENVELOPE_LEN = ENVELOPE_PT_LEN + AEAD_OVERHEAD;    // 77
static constexpr size_t KEY_HEADER_LEN = ENVELOPE_LEN;                     // same plaintext shape

// Relative path: directory components, optionally ending in a filename.
// Digest input = UTF-8 components joined by '/', no leading/trailing slash.
struct HierarchyPath {
    std::vector<std::string> components;

    static HierarchyPath parse(std::string_view s) {
        HierarchyPath p;
        if (s.empty()) return p; // root
        if (s.front() == '/' || s.back() == '/')
            fail(ErrorCode::InvalidPath, "leading/trailing slash: " + std::string(s));
        std::string comp;
        for (size_t i = 0; i <= s.size(); ++i) {
            if (i == s.size() || s[i] == '/') {
                if (comp.empty() || comp == "." || comp == "..")
                    fail(ErrorCode::InvalidPath, "bad component in " + std::string(s));
                if (comp == ENVELOPE_NAME || comp == DESCRIPTOR_NAME)
                    fail(ErrorCode::InvalidPath, comp + " is reserved");
                p.components.push_back(comp);
                comp.clear();
            } else {
                comp += s[i];
            }
        }
        if (!p.components.empty() &&
            (p.components.front() == "messages" || p.components.front() == "peers"))
            fail(ErrorCode::InvalidPath, p.components.front() + "/ is reserved");
        return p;
    }

    std::string joined() const {
        std::string out;
        for (size_t i = 0; i < components.size(); ++i) {
            if (i) out += '/';
            out += components[i];
        }
        return out;
    }

    bool is_root() const { return components.empty(); }
    size_t depth() const { return components.size(); }

    HierarchyPath parent() const {
        HierarchyPath p = *this;
        if (!p.components.empty()) p.components.pop_back();
        return p;
    }
    HierarchyPath prefix(size_t n) const {
        HierarchyPath p;
        p.components.assign(components.begin(), components.begin() + n);
        return p;
    }
    HierarchyPath child(const std::string& name) const {
        HierarchyPath p = *this;
        p.components.push_back(name);
        return p;
    }

    bool operator==(const HierarchyPath&) const = default;
};

inline Digest path_digest(const HierarchyPath& p) { return hash(to_bytes(p.joined())); }

namespace detail {
inline Bytes key_plaintext(KeyTag tag, const Digest& digest, const SymmetricKey& key) {
    Bytes pt;
    pt.reserve(ENVELOPE_PT_LEN);
    pt.push_back(static_cast<uint8_t>(tag));
    pt.insert(pt.end(), digest.bytes.begin(), digest.bytes.end());
    pt.insert(pt.end(), key.bytes.begin(), key.bytes.end());
    return pt;
}

struct KeyRecord {
    KeyTag tag;
    Digest digest;
    SymmetricKey key;
};

inline KeyRecord open_key_blob(const SymmetricKey& parent, BytesView blob) {
    if (blob.size() != ENVELOPE_LEN) fail(ErrorCode::MalformedBlob, "key blob must be 77 bytes");
    Bytes pt = aead_open(parent, AeadBlob::parse(blob), {});
    if (pt.size() != ENVELOPE_PT_LEN) fail(ErrorCode::MalformedBlob, "key blob plaintext length");
    KeyRecord r;
    if (pt[0] != static_cast<uint8_t>(KeyTag::DIRKEY) && pt[0] != static_cast<uint8_t>(KeyTag::FILEKEY))
        fail(ErrorCode::MalformedBlob, "unknown key tag");
    r.tag = static_cast<KeyTag>(pt[0]);
    r.digest = Digest::from_bytes(BytesView(pt).subspan(1, DIGEST_LEN));
    r.key = SymmetricKey::from_bytes(BytesView(pt).subspan(1 + DIGEST_LEN));
    return r;
}
} // namespace detail

// ---- directory-key envelopes ----

inline Bytes wrap_dir_key(const SymmetricKey& parent, const HierarchyPath& dir_path,
                          const SymmetricKey& kd) {
    return aead_seal(parent, detail::key_plaintext(KeyTag::DIRKEY, path_digest(dir_path), kd), {})
        .serialize();
}

inline SymmetricKey unwrap_dir_key(const SymmetricKey& parent, const HierarchyPath& dir_path,
                                   BytesView envelope) {
    auto rec = detail::open_key_blob(parent, envelope);
    if (rec.tag != KeyTag::DIRKEY) fail(ErrorCode::WrongKeyType, "expected a directory key");
    if (!(rec.digest == path_digest(dir_path)))
        fail(ErrorCode::PathMismatch, "envelope is bound to a different path");
    return rec.key;
}

// ---- per-file encryption ----

struct EncryptedFileBlob {
    AeadBlob key_header; // tag ‖ H(body serialization) ‖ Kf, sealed under Kd
    AeadBlob body;       // plaintext sealed under Kf

    Bytes serialize() const { return concat({key_header.serialize(), body.serialize()}); }

    static EncryptedFileBlob parse(BytesView raw) {
        if (raw.size() < KEY_HEADER_LEN + AEAD_OVERHEAD)
            fail(ErrorCode::MalformedBlob, "encrypted file too short");
        EncryptedFileBlob b;
        b.key_header = AeadBlob::parse(raw.subspan(0, KEY_HEADER_LEN));
        b.body = AeadBlob::parse(raw.subspan(KEY_HEADER_LEN));
        return b;
    }
};

inline EncryptedFileBlob encrypt_file(const SymmetricKey& kd, BytesView plaintext) {
    EncryptedFileBlob out;
    SymmetricKey kf = SymmetricKey::random();
    out.body = aead_seal(kf, plaintext, {});
    Digest body_digest = hash(out.body.serialize());
    out.key_header =
        aead_seal(kd, detail::key_plaintext(KeyTag::FILEKEY, body_digest, kf), {});
    return out;
}

// Header first (tag, then digest), body only afterwards.
inline Bytes decrypt_file(const SymmetricKey& kd, const EncryptedFileBlob& blob) {
    auto rec = detail::open_key_blob(kd, blob.key_header.serialize());
    if (rec.tag != KeyTag::FILEKEY) fail(ErrorCode::WrongKeyType, "expected a file key");
    if (!(rec.digest == hash(blob.body.serialize())))
        fail(ErrorCode::BodyDigestMismatch, "file body does not match its header digest");
    return aead_open(rec.key, blob.body, {});
}

inline Bytes decrypt_file(const SymmetricKey& kd, BytesView raw) {
    return decrypt_file(kd, EncryptedFileBlob::parse(raw));
}

// File key alone (sharing): header unwrap without opening the body.
inline SymmetricKey file_key_of(const SymmetricKey& kd, const EncryptedFileBlob& blob) {
    auto rec = detail::open_key_blob(kd, blob.key_header.serialize());
    if (rec.tag != KeyTag::FILEKEY) fail(ErrorCode::WrongKeyType, "expected a file key");
    return rec.key;
}

// Decrypt with only the file key (receiver side of sharing; no header check
// possible — that seal belongs to the sharer's directory key).
inline Bytes decrypt_body_with_file_key(const SymmetricKey& kf, const EncryptedFileBlob& blob) {
    return aead_open(kf, blob.body, {});
}

// ---- chained resolution over storage ----

inline std::string envelope_object_key(const HierarchyPath& dir) {
    return dir.is_root() ? std::string(ENVELOPE_NAME) : dir.joined() + "/" + ENVELOPE_NAME;
}

// Directory key of the deepest directory on `dir` by chained unwraps from RK.
inline SymmetricKey resolve_key(const SymmetricKey& root, const HierarchyPath& dir,
                                StorageChannel& store) {
    SymmetricKey current = root;
    for (size_t depth = 1; depth <= dir.depth(); ++depth) {
        HierarchyPath sub = dir.prefix(depth);
        std::string key = envelope_object_key(sub);
        if (!store.exists(key))
            fail(ErrorCode::MissingEnvelope, "no envelope for " + sub.joined(),
                 static_cast<int>(depth - 1));
        try {
            current = unwrap_dir_key(current, sub, store.get(key));
        } catch (const Error& e) {
            if (e.code() == ErrorCode::MissingEnvelope) throw;
            throw Error(e.code(), std::string(e.what()) + " (depth " + std::to_string(depth - 1) +
                                      ", dir " + sub.joined() + ")",
                        static_cast<int>(depth - 1));
        }
    }
    return current;
}

// Convenience wrapper binding RK + store: the working view of one domain.
class Hierarchy {
public:
    Hierarchy(StorageChannel& store, const SymmetricKey& root) : store_(store), root_(root) {}

    StorageChannel& store() { return store_; }
    const SymmetricKey& root_key() const { return root_; }

    SymmetricKey resolve_dir(const HierarchyPath& dir) { return resolve_key(root_, dir, store_); }

    // Creates envelopes (fresh Kd) for any missing directories on the way down.
    SymmetricKey ensure_dir(const HierarchyPath& dir) {
        SymmetricKey current = root_;
        for (size_t depth = 1; depth <= dir.depth(); ++depth) {
            HierarchyPath sub = dir.prefix(depth);
            std::string key = envelope_object_key(sub);
            if (store_.exists(key)) {
                current = unwrap_dir_key(current, sub, store_.get(key));
            } else {
                SymmetricKey kd = SymmetricKey::random();
                store_.put(key, wrap_dir_key(current, sub, kd));
                current = kd;
            }
        }
        return current;
    }

    void put_file(const HierarchyPath& path, BytesView plaintext) {
        require_file_path(path);
        SymmetricKey kd = ensure_dir(path.parent());
        store_.put(path.joined(), encrypt_file(kd, plaintext).serialize());
    }

    Bytes get_file(const HierarchyPath& path) {
        require_file_path(path);
        SymmetricKey kd = resolve_dir(path.parent());
        return decrypt_file(kd, read_blob(path));
    }

    EncryptedFileBlob read_blob(const HierarchyPath& path) {
        require_file_path(path);
        if (!store_.exists(path.joined())) fail(ErrorCode::NotFound, path.joined());
        return EncryptedFileBlob::parse(store_.get(path.joined()));
    }

    SymmetricKey file_key(const HierarchyPath& path) {
        SymmetricKey kd = resolve_dir(path.parent());
        return file_key_of(kd, read_blob(path));
    }

    std::vector<std::string> list_files(const HierarchyPath& dir) {
        std::string prefix = dir.is_root() ? "" : dir.joined() + "/";
        std::vector<std::string> out;
        for (auto& k : store_.list(prefix)) {
            std::string rest = k.substr(prefix.size());
            if (rest.find('/') != std::string::npos) continue; // deeper level
            if (rest == ENVELOPE_NAME || rest == DESCRIPTOR_NAME) continue;
            if (dir.is_root() && (k.rfind(MESSAGES_PREFIX, 0) == 0 || k.rfind(PEERS_PREFIX, 0) == 0))
                continue;
            out.push_back(rest);
        }
        return out;
    }

private:
    static void require_file_path(const HierarchyPath& path) {
        if (path.is_root()) fail(ErrorCode::InvalidPath, "expected a file path");
    }

    StorageChannel& store_;
    SymmetricKey root_;
};

} // namespace omnivault
