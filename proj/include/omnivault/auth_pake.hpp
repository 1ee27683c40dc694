#pragma once

// Multiple round-trip authorization: SRP-6a without identities, keyed by a
// one-time 6-digit passcode displayed on A and typed into B. Four messages:
// α → (β, s) → M1 → (M2, C) where C = seal(K_ses, RK, ad = M2). B never
// sends any RK material unless M1 verified; A never opens C unless M2
// verified. Each machine is one-shot; the passcode dies with the run.

#include "domain.hpp"
#include "oob.hpp"
#include "srp.hpp"
#include "storage.hpp"

namespace omnivault {

struct PakeOptions {
    const SrpGroup* group = &SrpGroup::production();
    std::chrono::milliseconds timeout = std::chrono::seconds(30);
    std::stop_token stop;

    // Test hooks. Derivation pins are honored only for test-mode groups;
    // pin_passcode fixes A's displayed code (deterministic runs).
    std::optional<std::string> pin_passcode;
    std::optional<uint64_t> hook_k, hook_x, hook_u, hook_a, hook_b;

    // Canary weakenings for harness power checks; never set in honest runs.
    bool skip_m1_check = false; // B responds even to a bad M1
    bool skip_m2_check = false; // A opens C even under a bad M2
};

namespace detail {
inline BigNum hooked(const SrpGroup& grp, const std::optional<uint64_t>& hook, BigNum real) {
    if (!hook) return real;
    if (!grp.test_only) fail(ErrorCode::CryptoFailure, "derivation pins require a test group");
    return BigNum(*hook);
}

inline BigNum field_int(const ProtocolMessage& m, const std::string& name) {
    auto it = m.payload.find(name);
    if (it == m.payload.end()) fail(ErrorCode::MalformedMessage, "missing field " + name);
    if (it->second.empty()) fail(ErrorCode::MalformedMessage, "empty integer field " + name);
    for (char c : it->second)
        if (hex_nibble(c) < 0) fail(ErrorCode::MalformedMessage, name + " is not hex");
    return BigNum::from_hex(it->second);
}

inline Bytes field_b64(const ProtocolMessage& m, const std::string& name) {
    auto it = m.payload.find(name);
    if (it == m.payload.end()) fail(ErrorCode::MalformedMessage, "missing field " + name);
    try {
        return from_base64(it->second);
    } catch (const Error&) {
        fail(ErrorCode::MalformedMessage, "field " + name + " is not valid base64");
    }
}
} // namespace detail

enum class PakeAPhase { INIT, SENT_ALPHA, SENT_M1, DONE, FAILED };
enum class PakeBPhase { AWAIT_ALPHA, AWAIT_M1, RESPONDED, FAILED };

class PakeNewDevice { // role A
public:
    PakeNewDevice(StorageChannel& channel, Bytes authorizer_device_id, PakeOptions opts = {})
        : channel_(channel), authorizer_id_(std::move(authorizer_device_id)), opts_(opts),
          grp_(*opts.group) {}

    // Sends α, returns the passcode to display.
    std::string round1() {
        require(PakeAPhase::INIT);
        const BigNum one(1);
        const BigNum n_minus_1 = grp_.N - one;
        do {
            a_ = detail::hooked(grp_, opts_.hook_a, srp::random_exponent(grp_));
            alpha_ = srp::client_public(grp_, a_);
            BigNum r = alpha_.mod(grp_.N);
            if (!r.is_zero() && !(r == one) && !(r == n_minus_1)) break;
        } while (!opts_.hook_a); // a pinned exponent is used as-is
        passcode_ = opts_.pin_passcode ? *opts_.pin_passcode : random_passcode();

        beta_s_uuid_ = make_uuid();
        ProtocolMessage msg;
        msg.uuid = make_uuid();
        msg.msg_type = "srp.alpha";
        msg.payload["alpha"] = alpha_.to_hex();
        msg.reply_uuid = beta_s_uuid_;
        msg.target_device_id = authorizer_id_;
        channel_.send_message(msg);

        phase_ = PakeAPhase::SENT_ALPHA;
        return passcode_;
    }

    // Receives (β, s), derives the session key, sends M1.
    void round2() {
        require(PakeAPhase::SENT_ALPHA);
        try {
            ProtocolMessage msg = channel_.await_message(beta_s_uuid_, opts_.timeout, opts_.stop);
            if (msg.msg_type != "srp.beta_s") fail(ErrorCode::MalformedMessage, "expected srp.beta_s");
            if (msg.reply_uuid.empty()) fail(ErrorCode::MalformedMessage, "no reply uuid for M1");
            beta_ = detail::field_int(msg, "beta");
            Bytes salt = detail::field_b64(msg, "s");
            if (salt.size() != 16) fail(ErrorCode::MalformedMessage, "salt must be 16 bytes");
            if (beta_.mod(grp_.N).is_zero())
                fail(ErrorCode::DegenerateBeta, "server public value is 0 mod N");

            BigNum k = detail::hooked(grp_, opts_.hook_k, srp::compute_k(grp_));
            BigNum x = detail::hooked(grp_, opts_.hook_x, srp::compute_x(salt, passcode_));
            BigNum u = detail::hooked(grp_, opts_.hook_u, srp::compute_u(grp_, alpha_, beta_));
            sigma_ = srp::client_sigma(grp_, beta_, k, x, a_, u);
            k_ses_ = srp::derive_session_key(grp_, sigma_);
            m1_ = srp::proof_m1(grp_, alpha_, beta_, k_ses_);

            m2_rk_uuid_ = make_uuid();
            ProtocolMessage m1_msg;
            m1_msg.uuid = msg.reply_uuid;
            m1_msg.msg_type = "srp.m1";
            m1_msg.payload["M1"] = to_base64(m1_);
            m1_msg.reply_uuid = m2_rk_uuid_;
            channel_.send_message(m1_msg);
            phase_ = PakeAPhase::SENT_M1;
        } catch (...) {
            phase_ = PakeAPhase::FAILED;
            throw;
        }
    }

    // Verifies M2 BEFORE opening C; returns the root key.
    RootKey finish() {
        require(PakeAPhase::SENT_M1);
        try {
            ProtocolMessage msg = channel_.await_message(m2_rk_uuid_, opts_.timeout, opts_.stop);
            if (msg.msg_type != "srp.m2_rk") fail(ErrorCode::MalformedMessage, "expected srp.m2_rk");
            Bytes m2 = detail::field_b64(msg, "M2");
            Bytes c = detail::field_b64(msg, "C");

            Bytes expected_m2 = srp::proof_m2(grp_, alpha_, m1_, k_ses_);
            if (!opts_.skip_m2_check && !ct_equal(m2, expected_m2))
                fail(ErrorCode::M2Mismatch, "session confirmation does not verify");

            Bytes rk_bytes = aead_open(k_ses_, AeadBlob::parse(c), m2);
            if (rk_bytes.size() != KEY_LEN) fail(ErrorCode::AuthFailure, "C payload is not one key");
            phase_ = PakeAPhase::DONE;
            return RootKey::from_bytes(rk_bytes);
        } catch (...) {
            phase_ = PakeAPhase::FAILED;
            throw;
        }
    }

    PakeAPhase phase() const { return phase_; }
    const std::string& passcode() const { return passcode_; }
    const BigNum& alpha() const { return alpha_; }
    const BigNum& beta() const { return beta_; }
    const BigNum& sigma() const { return sigma_; }
    const SymmetricKey& session_key() const { return k_ses_; }

private:
    void require(PakeAPhase p) {
        if (phase_ != p) fail(ErrorCode::CryptoFailure, "state machine misuse");
    }

    StorageChannel& channel_;
    Bytes authorizer_id_;
    PakeOptions opts_;
    const SrpGroup& grp_;
    BigNum a_, alpha_, beta_, sigma_;
    std::string passcode_;
    SymmetricKey k_ses_{};
    Bytes m1_;
    std::string beta_s_uuid_, m2_rk_uuid_;
    PakeAPhase phase_ = PakeAPhase::INIT;
};

class PakeAuthorizer { // role B
public:
    PakeAuthorizer(StorageChannel& channel, Bytes own_device_id, RootKey rk, PakeOptions opts = {})
        : channel_(channel), own_id_(std::move(own_device_id)), rk_(rk), opts_(opts),
          grp_(*opts.group) {}

    // Awaits α, derives the verifier from the passcode the user typed, sends (β, s).
    void round1(const std::string& entered_passcode) {
        require(PakeBPhase::AWAIT_ALPHA);
        try {
            ProtocolMessage msg =
                channel_.await_message_for_device(own_id_, opts_.timeout, opts_.stop);
            if (msg.msg_type != "srp.alpha") fail(ErrorCode::MalformedMessage, "expected srp.alpha");
            if (msg.reply_uuid.empty()) fail(ErrorCode::MalformedMessage, "no reply uuid for beta_s");
            alpha_ = detail::field_int(msg, "alpha");
            if (alpha_.mod(grp_.N).is_zero())
                fail(ErrorCode::DegenerateAlpha, "client public value is 0 mod N");

            salt_ = random_bytes(16);
            k_ = detail::hooked(grp_, opts_.hook_k, srp::compute_k(grp_));
            BigNum x = detail::hooked(grp_, opts_.hook_x, srp::compute_x(salt_, entered_passcode));
            v_ = srp::verifier(grp_, x);
            b_ = detail::hooked(grp_, opts_.hook_b, srp::random_exponent(grp_));
            beta_ = srp::server_public(grp_, k_, v_, b_);

            m1_uuid_ = make_uuid();
            ProtocolMessage resp;
            resp.uuid = msg.reply_uuid;
            resp.msg_type = "srp.beta_s";
            resp.payload["beta"] = beta_.to_hex();
            resp.payload["s"] = to_base64(salt_);
            resp.reply_uuid = m1_uuid_;
            channel_.send_message(resp);
            phase_ = PakeBPhase::AWAIT_M1;
        } catch (...) {
            phase_ = PakeBPhase::FAILED;
            throw;
        }
    }

    // Awaits M1; only a verifying M1 releases the sealed root key.
    void round2() {
        require(PakeBPhase::AWAIT_M1);
        try {
            ProtocolMessage msg = channel_.await_message(m1_uuid_, opts_.timeout, opts_.stop);
            if (msg.msg_type != "srp.m1") fail(ErrorCode::MalformedMessage, "expected srp.m1");
            if (msg.reply_uuid.empty()) fail(ErrorCode::MalformedMessage, "no reply uuid for m2_rk");
            Bytes m1 = detail::field_b64(msg, "M1");

            BigNum u = detail::hooked(grp_, opts_.hook_u, srp::compute_u(grp_, alpha_, beta_));
            sigma_ = srp::server_sigma(grp_, alpha_, v_, u, b_);
            k_ses_ = srp::derive_session_key(grp_, sigma_);

            Bytes expected_m1 = srp::proof_m1(grp_, alpha_, beta_, k_ses_);
            if (!opts_.skip_m1_check && !ct_equal(m1, expected_m1))
                fail(ErrorCode::M1Mismatch, "wrong passcode or tampered proof; no key material sent");

            Bytes m2 = srp::proof_m2(grp_, alpha_, m1, k_ses_);
            Bytes c = aead_seal(k_ses_, Bytes(rk_.bytes.begin(), rk_.bytes.end()), m2).serialize();

            sent_rk_material_ = true;
            ProtocolMessage resp;
            resp.uuid = msg.reply_uuid;
            resp.msg_type = "srp.m2_rk";
            resp.payload["M2"] = to_base64(m2);
            resp.payload["C"] = to_base64(c);
            channel_.send_message(resp);
            phase_ = PakeBPhase::RESPONDED;
        } catch (...) {
            phase_ = PakeBPhase::FAILED;
            throw;
        }
    }

    PakeBPhase phase() const { return phase_; }
    const RootKey& root_key() const { return rk_; }
    const BigNum& alpha() const { return alpha_; }
    const BigNum& beta() const { return beta_; }
    const BigNum& sigma() const { return sigma_; }
    const SymmetricKey& session_key() const { return k_ses_; }
    bool sent_rk_material() const { return sent_rk_material_; }

private:
    void require(PakeBPhase p) {
        if (phase_ != p) fail(ErrorCode::CryptoFailure, "state machine misuse");
    }

    StorageChannel& channel_;
    Bytes own_id_;
    RootKey rk_;
    PakeOptions opts_;
    const SrpGroup& grp_;
    BigNum alpha_, beta_, b_, k_, v_, sigma_;
    Bytes salt_;
    SymmetricKey k_ses_{};
    std::string m1_uuid_;
    bool sent_rk_material_ = false;
    PakeBPhase phase_ = PakeBPhase::AWAIT_ALPHA;
};

// Pipe-driven drivers: the passcode travels A → B over the 6-digit class.

inline RootKey run_pake_new_device(OobPipe& pipe, PakeNewDevice& a) {
    std::string passcode = a.round1();
    pipe.send(OobSide::A, to_bytes(passcode));
    a.round2();
    return a.finish();
}

inline void run_pake_authorizer(OobPipe& pipe, PakeAuthorizer& b,
                                std::chrono::milliseconds oob_timeout = std::chrono::seconds(30)) {
    std::string passcode = to_string(pipe.receive(OobSide::B, oob_timeout));
    b.round1(passcode);
    b.round2();
}

} // namespace omnivault
