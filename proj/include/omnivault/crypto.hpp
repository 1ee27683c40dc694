#pragma once

// Primitive layer: AES-GCM AEAD, SHA-256, HMAC-SHA-256, RSA-2048-OAEP key
// wrap, X25519 agreement, CSPRNG. Everything else builds on these.

#include <array>
#include <cstdio>
#include <memory>
#include <optional>

#include <openssl/bio.h>
#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/rsa.h>
#include <openssl/x509.h>

#include "bytes.hpp"
#include "error.hpp"

namespace omnivault {

static constexpr size_t KEY_LEN = 16;   // 128-bit symmetric keys
static constexpr size_t IV_LEN = 12;
static constexpr size_t TAG_LEN = 16;
static constexpr size_t DIGEST_LEN = 32;
static constexpr size_t AEAD_OVERHEAD = IV_LEN + TAG_LEN; // 28
static constexpr int RSA_BITS = 2048;

namespace detail {
[[noreturn]] inline void ossl_fail(const char* what) {
    char buf[256] = {0};
    ERR_error_string_n(ERR_get_error(), buf, sizeof(buf));
    fail(ErrorCode::CryptoFailure, std::string(what) + " (" + buf + ")");
}
} // namespace detail

inline Bytes random_bytes(size_t n) {
    Bytes out(n);
    if (n > 0 && RAND_bytes(out.data(), static_cast<int>(n)) != 1)
        detail::ossl_fail("RAND_bytes");
    return out;
}

struct Digest {
    std::array<uint8_t, DIGEST_LEN> bytes{};

    BytesView view() const { return {bytes.data(), bytes.size()}; }
    bool operator==(const Digest&) const = default;

    static Digest from_bytes(BytesView b) {
        if (b.size() != DIGEST_LEN) fail(ErrorCode::BadLength, "digest must be 32 bytes");
        Digest d;
        std::memcpy(d.bytes.data(), b.data(), DIGEST_LEN);
        return d;
    }
};

struct SymmetricKey {
    std::array<uint8_t, KEY_LEN> bytes{};

    BytesView view() const { return {bytes.data(), bytes.size()}; }
    bool operator==(const SymmetricKey&) const = default;

    static SymmetricKey random() {
        SymmetricKey k;
        if (RAND_bytes(k.bytes.data(), KEY_LEN) != 1) detail::ossl_fail("RAND_bytes");
        return k;
    }
    static SymmetricKey from_bytes(BytesView b) {
        if (b.size() != KEY_LEN) fail(ErrorCode::InvalidKey, "symmetric key must be 16 bytes");
        SymmetricKey k;
        std::memcpy(k.bytes.data(), b.data(), KEY_LEN);
        return k;
    }
};

inline Digest hash(BytesView data) {
    Digest d;
    size_t outlen = 0;
    if (EVP_Q_digest(nullptr, "SHA256", nullptr, data.empty() ? "" : (const char*)data.data(),
                     data.size(), d.bytes.data(), &outlen) != 1 ||
        outlen != DIGEST_LEN)
        detail::ossl_fail("EVP_Q_digest");
    return d;
}

inline Bytes hmac(BytesView key, BytesView data) {
    Bytes out(DIGEST_LEN);
    size_t outlen = 0;
    if (EVP_Q_mac(nullptr, "HMAC", nullptr, "SHA256", nullptr, key.data(), key.size(),
                  data.empty() ? (const unsigned char*)"" : data.data(), data.size(),
                  out.data(), out.size(), &outlen) == nullptr ||
        outlen != DIGEST_LEN)
        detail::ossl_fail("EVP_Q_mac");
    return out;
}

inline Bytes hmac(const SymmetricKey& key, BytesView data) {
    return hmac(key.view(), data);
}

// iv ‖ ciphertext ‖ tag, no framing; total = |plaintext| + 28.
struct AeadBlob {
    std::array<uint8_t, IV_LEN> iv{};
    Bytes ciphertext;
    std::array<uint8_t, TAG_LEN> tag{};

    Bytes serialize() const {
        Bytes out;
        out.reserve(IV_LEN + ciphertext.size() + TAG_LEN);
        out.insert(out.end(), iv.begin(), iv.end());
        out.insert(out.end(), ciphertext.begin(), ciphertext.end());
        out.insert(out.end(), tag.begin(), tag.end());
        return out;
    }

    static AeadBlob parse(BytesView b) {
        if (b.size() < AEAD_OVERHEAD) fail(ErrorCode::MalformedBlob, "AEAD blob shorter than 28 bytes");
        AeadBlob blob;
        std::memcpy(blob.iv.data(), b.data(), IV_LEN);
        blob.ciphertext.assign(b.begin() + IV_LEN, b.end() - TAG_LEN);
        std::memcpy(blob.tag.data(), b.data() + (b.size() - TAG_LEN), TAG_LEN);
        return blob;
    }
};

namespace testing {
// KAT reproduction hook: when set, the next seal uses this nonce instead of a
// fresh random one. Never touched outside tests.
inline const std::array<uint8_t, IV_LEN>* forced_nonce = nullptr;
// When set, every seal appends the nonce it used (nonce-uniqueness audits).
inline std::vector<Bytes>* nonce_log = nullptr;
} // namespace testing

namespace detail {

inline const EVP_CIPHER* gcm_cipher_for(size_t keylen) {
    if (keylen == 16) return EVP_aes_128_gcm();
    if (keylen == 32) return EVP_aes_256_gcm();
    fail(ErrorCode::InvalidKey, "AEAD key must be 16 or 32 bytes");
}

struct CipherCtxFree {
    void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxFree>;

} // namespace detail

inline AeadBlob aead_seal(BytesView key, BytesView plaintext, BytesView associated_data) {
    AeadBlob blob;
    if (testing::forced_nonce) {
        blob.iv = *testing::forced_nonce;
        testing::forced_nonce = nullptr;
    } else if (RAND_bytes(blob.iv.data(), IV_LEN) != 1) {
        detail::ossl_fail("RAND_bytes(iv)");
    }
    if (testing::nonce_log)
        testing::nonce_log->emplace_back(blob.iv.begin(), blob.iv.end());

    detail::CipherCtx ctx(EVP_CIPHER_CTX_new());
    if (!ctx) detail::ossl_fail("EVP_CIPHER_CTX_new");
    if (EVP_EncryptInit_ex(ctx.get(), detail::gcm_cipher_for(key.size()), nullptr, nullptr, nullptr) != 1)
        detail::ossl_fail("EncryptInit(cipher)");
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, IV_LEN, nullptr) != 1)
        detail::ossl_fail("SET_IVLEN");
    if (EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), blob.iv.data()) != 1)
        detail::ossl_fail("EncryptInit(key,iv)");

    int len = 0;
    if (!associated_data.empty() &&
        EVP_EncryptUpdate(ctx.get(), nullptr, &len, associated_data.data(),
                          static_cast<int>(associated_data.size())) != 1)
        detail::ossl_fail("EncryptUpdate(aad)");

    blob.ciphertext.resize(plaintext.size());
    if (!plaintext.empty() &&
        EVP_EncryptUpdate(ctx.get(), blob.ciphertext.data(), &len, plaintext.data(),
                          static_cast<int>(plaintext.size())) != 1)
        detail::ossl_fail("EncryptUpdate");
    if (EVP_EncryptFinal_ex(ctx.get(), blob.ciphertext.data() + blob.ciphertext.size(), &len) != 1)
        detail::ossl_fail("EncryptFinal");
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, TAG_LEN, blob.tag.data()) != 1)
        detail::ossl_fail("GET_TAG");
    return blob;
}

inline Bytes aead_open(BytesView key, const AeadBlob& blob, BytesView associated_data) {
    detail::CipherCtx ctx(EVP_CIPHER_CTX_new());
    if (!ctx) detail::ossl_fail("EVP_CIPHER_CTX_new");
    if (EVP_DecryptInit_ex(ctx.get(), detail::gcm_cipher_for(key.size()), nullptr, nullptr, nullptr) != 1)
        detail::ossl_fail("DecryptInit(cipher)");
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, IV_LEN, nullptr) != 1)
        detail::ossl_fail("SET_IVLEN");
    if (EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), blob.iv.data()) != 1)
        detail::ossl_fail("DecryptInit(key,iv)");

    int len = 0;
    if (!associated_data.empty() &&
        EVP_DecryptUpdate(ctx.get(), nullptr, &len, associated_data.data(),
                          static_cast<int>(associated_data.size())) != 1)
        detail::ossl_fail("DecryptUpdate(aad)");

    Bytes plaintext(blob.ciphertext.size());
    if (!blob.ciphertext.empty() &&
        EVP_DecryptUpdate(ctx.get(), plaintext.data(), &len, blob.ciphertext.data(),
                          static_cast<int>(blob.ciphertext.size())) != 1)
        detail::ossl_fail("DecryptUpdate");

    std::array<uint8_t, TAG_LEN> tag = blob.tag;
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, TAG_LEN, tag.data()) != 1)
        detail::ossl_fail("SET_TAG");
    if (EVP_DecryptFinal_ex(ctx.get(), plaintext.data() + plaintext.size(), &len) != 1)
        fail(ErrorCode::AuthFailure, "AEAD tag verification failed");
    return plaintext;
}

inline AeadBlob aead_seal(const SymmetricKey& key, BytesView pt, BytesView ad) {
    return aead_seal(key.view(), pt, ad);
}
inline Bytes aead_open(const SymmetricKey& key, const AeadBlob& blob, BytesView ad) {
    return aead_open(key.view(), blob, ad);
}
inline Bytes aead_open(const SymmetricKey& key, BytesView serialized, BytesView ad) {
    return aead_open(key.view(), AeadBlob::parse(serialized), ad);
}

// ---- RSA-2048 device keypairs, OAEP(SHA-256) wrap of one symmetric key ----

namespace detail {
struct PkeyFree {
    void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct PkeyCtxFree {
    void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
};
using PkeyCtx = std::unique_ptr<EVP_PKEY_CTX, PkeyCtxFree>;
using PkeyPtr = std::shared_ptr<EVP_PKEY>;

inline PkeyPtr pkey_ptr(EVP_PKEY* raw) { return PkeyPtr(raw, PkeyFree{}); }

inline PkeyPtr parse_public_der(BytesView der) {
    const unsigned char* p = der.data();
    EVP_PKEY* raw = d2i_PUBKEY(nullptr, &p, static_cast<long>(der.size()));
    if (!raw) fail(ErrorCode::MalformedBlob, "bad public key encoding");
    return pkey_ptr(raw);
}

inline void set_oaep(EVP_PKEY_CTX* ctx) {
    if (EVP_PKEY_CTX_set_rsa_padding(ctx, RSA_PKCS1_OAEP_PADDING) <= 0 ||
        EVP_PKEY_CTX_set_rsa_oaep_md(ctx, EVP_sha256()) <= 0 ||
        EVP_PKEY_CTX_set_rsa_mgf1_md(ctx, EVP_sha256()) <= 0)
        ossl_fail("OAEP setup");
}
} // namespace detail

class DeviceKeypair {
public:
    DeviceKeypair() = default;

    static DeviceKeypair generate() {
        detail::PkeyCtx ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_RSA, nullptr));
        if (!ctx || EVP_PKEY_keygen_init(ctx.get()) <= 0 ||
            EVP_PKEY_CTX_set_rsa_keygen_bits(ctx.get(), RSA_BITS) <= 0)
            detail::ossl_fail("RSA keygen init");
        EVP_PKEY* raw = nullptr;
        if (EVP_PKEY_keygen(ctx.get(), &raw) <= 0) detail::ossl_fail("RSA keygen");
        DeviceKeypair kp;
        kp.key_ = detail::pkey_ptr(raw);
        return kp;
    }

    bool valid() const { return static_cast<bool>(key_); }

    // SubjectPublicKeyInfo DER — the wire/descriptor form of PK.
    Bytes public_der() const {
        unsigned char* buf = nullptr;
        int n = i2d_PUBKEY(key_.get(), &buf);
        if (n <= 0) detail::ossl_fail("i2d_PUBKEY");
        Bytes out(buf, buf + n);
        OPENSSL_free(buf);
        return out;
    }

    std::string private_pem() const {
        std::unique_ptr<BIO, decltype(&BIO_free)> bio(BIO_new(BIO_s_mem()), BIO_free);
        if (!bio || PEM_write_bio_PrivateKey(bio.get(), key_.get(), nullptr, nullptr, 0, nullptr, nullptr) != 1)
            detail::ossl_fail("PEM_write_bio_PrivateKey");
        char* data = nullptr;
        long n = BIO_get_mem_data(bio.get(), &data);
        return std::string(data, static_cast<size_t>(n));
    }

    static DeviceKeypair from_private_pem(const std::string& pem) {
        std::unique_ptr<BIO, decltype(&BIO_free)> bio(
            BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())), BIO_free);
        EVP_PKEY* raw = bio ? PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr) : nullptr;
        if (!raw) fail(ErrorCode::MalformedBlob, "bad private key PEM");
        DeviceKeypair kp;
        kp.key_ = detail::pkey_ptr(raw);
        return kp;
    }

    EVP_PKEY* handle() const { return key_.get(); }

private:
    detail::PkeyPtr key_;
};

inline Bytes asym_wrap(BytesView public_der, const SymmetricKey& key) {
    auto pkey = detail::parse_public_der(public_der);
    detail::PkeyCtx ctx(EVP_PKEY_CTX_new(pkey.get(), nullptr));
    if (!ctx || EVP_PKEY_encrypt_init(ctx.get()) <= 0) detail::ossl_fail("encrypt init");
    detail::set_oaep(ctx.get());
    size_t outlen = 0;
    if (EVP_PKEY_encrypt(ctx.get(), nullptr, &outlen, key.bytes.data(), KEY_LEN) <= 0)
        detail::ossl_fail("encrypt size");
    Bytes out(outlen);
    if (EVP_PKEY_encrypt(ctx.get(), out.data(), &outlen, key.bytes.data(), KEY_LEN) <= 0)
        detail::ossl_fail("encrypt");
    out.resize(outlen);
    return out;
}

inline Bytes asym_wrap(const DeviceKeypair& kp, const SymmetricKey& key) {
    return asym_wrap(kp.public_der(), key);
}

inline SymmetricKey asym_unwrap(const DeviceKeypair& kp, BytesView wrapped) {
    detail::PkeyCtx ctx(EVP_PKEY_CTX_new(kp.handle(), nullptr));
    if (!ctx || EVP_PKEY_decrypt_init(ctx.get()) <= 0) detail::ossl_fail("decrypt init");
    detail::set_oaep(ctx.get());
    size_t outlen = 0;
    if (EVP_PKEY_decrypt(ctx.get(), nullptr, &outlen, wrapped.data(), wrapped.size()) <= 0)
        fail(ErrorCode::UnwrapFailure, "asymmetric unwrap failed");
    Bytes out(outlen);
    if (EVP_PKEY_decrypt(ctx.get(), out.data(), &outlen, wrapped.data(), wrapped.size()) <= 0)
        fail(ErrorCode::UnwrapFailure, "asymmetric unwrap failed");
    out.resize(outlen);
    if (out.size() != KEY_LEN) fail(ErrorCode::UnwrapFailure, "unwrapped payload is not one key");
    return SymmetricKey::from_bytes(out);
}

inline DeviceKeypair asym_keygen() { return DeviceKeypair::generate(); }

// ---- X25519 ephemeral agreement (peering) ----

class EcdhKeypair {
public:
    static EcdhKeypair generate() {
        detail::PkeyCtx ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_X25519, nullptr));
        if (!ctx || EVP_PKEY_keygen_init(ctx.get()) <= 0) detail::ossl_fail("X25519 keygen init");
        EVP_PKEY* raw = nullptr;
        if (EVP_PKEY_keygen(ctx.get(), &raw) <= 0) detail::ossl_fail("X25519 keygen");
        EcdhKeypair kp;
        kp.key_ = detail::pkey_ptr(raw);
        return kp;
    }

    Bytes public_raw() const {
        size_t len = 32;
        Bytes out(len);
        if (EVP_PKEY_get_raw_public_key(key_.get(), out.data(), &len) != 1 || len != 32)
            detail::ossl_fail("get_raw_public_key");
        return out;
    }

    Bytes derive(BytesView peer_public_raw) const {
        if (peer_public_raw.size() != 32) fail(ErrorCode::BadLength, "X25519 public key must be 32 bytes");
        detail::PkeyPtr peer = detail::pkey_ptr(EVP_PKEY_new_raw_public_key(
            EVP_PKEY_X25519, nullptr, peer_public_raw.data(), peer_public_raw.size()));
        if (!peer) detail::ossl_fail("peer public import");
        detail::PkeyCtx ctx(EVP_PKEY_CTX_new(key_.get(), nullptr));
        if (!ctx || EVP_PKEY_derive_init(ctx.get()) <= 0 ||
            EVP_PKEY_derive_set_peer(ctx.get(), peer.get()) <= 0)
            detail::ossl_fail("derive init");
        size_t len = 0;
        if (EVP_PKEY_derive(ctx.get(), nullptr, &len) <= 0) detail::ossl_fail("derive size");
        Bytes out(len);
        if (EVP_PKEY_derive(ctx.get(), out.data(), &len) <= 0) detail::ossl_fail("derive");
        out.resize(len);
        return out;
    }

private:
    detail::PkeyPtr key_;
};

// Uniform over 000000–999999, leading zeros preserved.
inline std::string random_passcode() {
    // rejection-sample below the largest multiple of 10^6 that fits in 32 bits
    constexpr uint32_t LIMIT = 4294000000u;
    uint32_t v;
    do {
        Bytes r = random_bytes(4);
        v = (uint32_t(r[0]) << 24) | (uint32_t(r[1]) << 16) | (uint32_t(r[2]) << 8) | uint32_t(r[3]);
    } while (v >= LIMIT);
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%06u", v % 1000000u);
    return std::string(buf, 6);
}

} // namespace omnivault
