#pragma once

// SRP-6a algebra over GF(N), identity-free variant: x is derived from salt
// and a one-time 6-digit passcode only. Big integers entering any hash are
// big-endian, left-padded to the byte length of N. Production group is the
// standard 2048-bit SRP group; small groups exist for test mode only.

#include <cctype>

#include <openssl/bn.h>

#include "crypto.hpp"

namespace omnivault {

class BigNum {
public:
    BigNum() : bn_(BN_new()) {
        if (!bn_) detail::ossl_fail("BN_new");
        BN_zero(bn_);
    }
    explicit BigNum(uint64_t v) : BigNum() {
        if (BN_set_word(bn_, v) != 1) detail::ossl_fail("BN_set_word");
    }
    BigNum(const BigNum& o) : bn_(BN_dup(o.bn_)) {
        if (!bn_) detail::ossl_fail("BN_dup");
    }
    BigNum(BigNum&& o) noexcept : bn_(o.bn_) { o.bn_ = nullptr; }
    BigNum& operator=(BigNum o) noexcept {
        std::swap(bn_, o.bn_);
        return *this;
    }
    ~BigNum() {
        if (bn_) BN_free(bn_);
    }

    static BigNum from_hex(const std::string& hex) {
        BigNum r;
        BIGNUM* p = r.bn_;
        if (BN_hex2bn(&p, hex.c_str()) == 0) fail(ErrorCode::MalformedBlob, "bad hex integer");
        r.bn_ = p;
        return r;
    }

    static BigNum from_bytes(BytesView be) {
        BigNum r;
        if (!BN_bin2bn(be.data(), static_cast<int>(be.size()), r.bn_))
            detail::ossl_fail("BN_bin2bn");
        return r;
    }

    // uniform in [1, upper-1]
    static BigNum random_below(const BigNum& upper) {
        BigNum r;
        BigNum bound = upper - BigNum(1);
        do {
            if (BN_rand_range(r.bn_, bound.bn_) != 1) detail::ossl_fail("BN_rand_range");
        } while (BN_is_zero(r.bn_));
        return r;
    }

    static BigNum random_bits(int bits) {
        BigNum r;
        do {
            if (BN_rand(r.bn_, bits, BN_RAND_TOP_ANY, BN_RAND_BOTTOM_ANY) != 1)
                detail::ossl_fail("BN_rand");
        } while (BN_is_zero(r.bn_));
        return r;
    }

    Bytes to_bytes() const {
        Bytes out(static_cast<size_t>(BN_num_bytes(bn_)));
        if (!out.empty()) BN_bn2bin(bn_, out.data());
        return out;
    }

    Bytes to_bytes_padded(size_t len) const {
        Bytes out(len);
        if (BN_bn2binpad(bn_, out.data(), static_cast<int>(len)) < 0)
            fail(ErrorCode::BadLength, "integer wider than pad width");
        return out;
    }

    std::string to_hex() const {
        char* s = BN_bn2hex(bn_);
        if (!s) detail::ossl_fail("BN_bn2hex");
        std::string out(s);
        OPENSSL_free(s);
        for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        // normalize away BN's leading zero on odd-width values
        if (out.size() > 1 && out[0] == '0' && out != "0") out.erase(0, out.find_first_not_of('0'));
        if (out.empty()) out = "0";
        return out;
    }

    uint64_t to_u64() const {
        BN_ULONG w = BN_get_word(bn_);
        return static_cast<uint64_t>(w);
    }

    bool is_zero() const { return BN_is_zero(bn_); }
    bool operator==(const BigNum& o) const { return BN_cmp(bn_, o.bn_) == 0; }
    bool operator<(const BigNum& o) const { return BN_cmp(bn_, o.bn_) < 0; }

    BigNum operator+(const BigNum& o) const {
        BigNum r;
        if (BN_add(r.bn_, bn_, o.bn_) != 1) detail::ossl_fail("BN_add");
        return r;
    }
    BigNum operator-(const BigNum& o) const {
        BigNum r;
        if (BN_sub(r.bn_, bn_, o.bn_) != 1) detail::ossl_fail("BN_sub");
        return r;
    }
    BigNum operator*(const BigNum& o) const {
        BigNum r;
        if (BN_mul(r.bn_, bn_, o.bn_, ctx()) != 1) detail::ossl_fail("BN_mul");
        return r;
    }

    BigNum mod(const BigNum& m) const {
        BigNum r;
        if (BN_nnmod(r.bn_, bn_, m.bn_, ctx()) != 1) detail::ossl_fail("BN_nnmod");
        return r;
    }
    BigNum mod_exp(const BigNum& e, const BigNum& m) const {
        BigNum r;
        if (BN_mod_exp(r.bn_, bn_, e.bn_, m.bn_, ctx()) != 1) detail::ossl_fail("BN_mod_exp");
        return r;
    }
    BigNum mod_mul(const BigNum& o, const BigNum& m) const {
        BigNum r;
        if (BN_mod_mul(r.bn_, bn_, o.bn_, m.bn_, ctx()) != 1) detail::ossl_fail("BN_mod_mul");
        return r;
    }
    BigNum mod_add(const BigNum& o, const BigNum& m) const {
        BigNum r;
        if (BN_mod_add(r.bn_, bn_, o.bn_, m.bn_, ctx()) != 1) detail::ossl_fail("BN_mod_add");
        return r;
    }
    BigNum mod_sub(const BigNum& o, const BigNum& m) const {
        BigNum r;
        if (BN_mod_sub(r.bn_, bn_, o.bn_, m.bn_, ctx()) != 1) detail::ossl_fail("BN_mod_sub");
        return r;
    }

private:
    static BN_CTX* ctx() {
        thread_local std::unique_ptr<BN_CTX, decltype(&BN_CTX_free)> c(BN_CTX_new(), BN_CTX_free);
        return c.get();
    }
    BIGNUM* bn_;
};

struct SrpGroup {
    BigNum N;
    BigNum g;
    size_t n_bytes;   // pad width for hash inputs
    bool test_only;

    // 2048-bit group from the SRP standardization (g = 2).
    static const SrpGroup& production() {
        static const SrpGroup grp = [] {
            SrpGroup s{
                BigNum::from_hex(
                    "AC6BDB41324A9A9BF166DE5E1389582FAF72B6651987EE07FC3192943DB56050"
                    "A37329CBB4A099ED8193E0757767A13DD52312AB4B03310DCD7F48A9DA04FD50"
                    "E8083969EDB767B0CF6095179A163AB3661A05FBD5FAAAE82918A9962F0B93B8"
                    "55F97993EC975EEAA80D740ADBF4FF747359D041D5C33EA71D281E446B14773B"
                    "CA97B43A23FB801676BD207A436C6481F1D2B9078717461A5B9D32E688F87748"
                    "544523B524B0D57D5EA77A2775D2ECFA032CFBDBF52FB3786160279004E57AE6"
                    "AF874E7303CE53299CCC041C7BC308D82A5698F3A8D0C38271AE35F8E9DBFBB6"
                    "94B5C803D89F7AE435DE236D525F54759B65E372FCD68EF20FA7111F9E4AFF73"),
                BigNum(2), 256, false};
            return s;
        }();
        return grp;
    }

    static SrpGroup toy(uint64_t n, uint64_t g) {
        BigNum N(n);
        size_t width = N.to_bytes().size();
        return SrpGroup{std::move(N), BigNum(g), width, true};
    }
};

namespace srp {

inline Bytes pad(const BigNum& v, const SrpGroup& grp) { return v.to_bytes_padded(grp.n_bytes); }

inline BigNum hash_to_int(BytesView data) { return BigNum::from_bytes(hash(data).view()); }

// k = H(pad(N) ‖ pad(g))
inline BigNum compute_k(const SrpGroup& grp) {
    return hash_to_int(concat({pad(grp.N, grp), pad(grp.g, grp)}));
}

// x = H(s ‖ P) — no identity, per the passcode design
inline BigNum compute_x(BytesView salt, const std::string& passcode) {
    return hash_to_int(concat({salt, to_bytes(passcode)}));
}

// u = H(pad(α) ‖ pad(β))
inline BigNum compute_u(const SrpGroup& grp, const BigNum& alpha, const BigNum& beta) {
    return hash_to_int(concat({pad(alpha, grp), pad(beta, grp)}));
}

inline BigNum random_exponent(const SrpGroup& grp) {
    // small groups sweep the full range; production uses 256-bit exponents
    return grp.test_only ? BigNum::random_below(grp.N - BigNum(1)) : BigNum::random_bits(256);
}

inline BigNum verifier(const SrpGroup& grp, const BigNum& x) { return grp.g.mod_exp(x, grp.N); }

inline BigNum client_public(const SrpGroup& grp, const BigNum& a) {
    return grp.g.mod_exp(a, grp.N);
}

// β = (k·v + g^b) mod N
inline BigNum server_public(const SrpGroup& grp, const BigNum& k, const BigNum& v,
                            const BigNum& b) {
    return k.mod_mul(v, grp.N).mod_add(grp.g.mod_exp(b, grp.N), grp.N);
}

// σ_A = (β − k·g^x)^(a + u·x) mod N
inline BigNum client_sigma(const SrpGroup& grp, const BigNum& beta, const BigNum& k,
                           const BigNum& x, const BigNum& a, const BigNum& u) {
    BigNum base = beta.mod_sub(k.mod_mul(grp.g.mod_exp(x, grp.N), grp.N), grp.N);
    BigNum exp = a + u * x;
    return base.mod_exp(exp, grp.N);
}

// σ_B = (α·v^u)^b mod N
inline BigNum server_sigma(const SrpGroup& grp, const BigNum& alpha, const BigNum& v,
                           const BigNum& u, const BigNum& b) {
    return alpha.mod_mul(v.mod_exp(u, grp.N), grp.N).mod_exp(b, grp.N);
}

// K_ses = first 16 bytes of H(pad(σ))
inline SymmetricKey derive_session_key(const SrpGroup& grp, const BigNum& sigma) {
    Digest d = hash(pad(sigma, grp));
    return SymmetricKey::from_bytes(BytesView(d.bytes.data(), KEY_LEN));
}

// M1 = H(pad(α) ‖ pad(β) ‖ K_ses);  M2 = H(pad(α) ‖ M1 ‖ K_ses)
inline Bytes proof_m1(const SrpGroup& grp, const BigNum& alpha, const BigNum& beta,
                      const SymmetricKey& k_ses) {
    Digest d = hash(concat({pad(alpha, grp), pad(beta, grp), k_ses.view()}));
    return Bytes(d.bytes.begin(), d.bytes.end());
}

inline Bytes proof_m2(const SrpGroup& grp, const BigNum& alpha, BytesView m1,
                      const SymmetricKey& k_ses) {
    Digest d = hash(concat({pad(alpha, grp), m1, k_ses.view()}));
    return Bytes(d.bytes.begin(), d.bytes.end());
}

} // namespace srp
} // namespace omnivault
