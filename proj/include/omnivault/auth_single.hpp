#pragma once

// Single round-trip authorization. New device A sends PK_A over the untrusted
// channel and hands (H(PK_A), K_SAuth) to the authorizer over a 48-byte OOB
// payload; B verifies the digest BEFORE responding, then returns
// M1 = wrap(PK_A, RK), M2 = HMAC(K_SAuth, M1). A verifies M2 BEFORE
// unwrapping. One machine per role, one shot each; any failed check is
// terminal.

#include "domain.hpp"
#include "oob.hpp"
#include "storage.hpp"

namespace omnivault {

struct SingleOptions {
    std::chrono::milliseconds timeout = std::chrono::seconds(30);
    std::stop_token stop;
    // Deliberate weakenings for harness power checks (canary variants). The
    // honest configuration never sets these.
    bool skip_oob_digest_check = false;
    bool skip_response_mac_check = false;
};

enum class SingleAPhase { INIT, SENT_PK, DONE, FAILED };
enum class SingleBPhase { AWAIT_OOB, AWAIT_PK, RESPONDED, FAILED };

class SingleNewDevice { // role A
public:
    SingleNewDevice(StorageChannel& channel, Bytes authorizer_device_id,
                    DeviceKeypair keypair = DeviceKeypair::generate(),
                    SingleOptions opts = {})
        : channel_(channel), authorizer_id_(std::move(authorizer_device_id)),
          keypair_(std::move(keypair)), opts_(opts) {}

    // Emits the cloud message and returns the payload for the OOB channel.
    OobPayloadSingle start() {
        require_phase(SingleAPhase::INIT);
        k_sauth_ = SymmetricKey::random(); // fresh per run, never reused
        reply_uuid_ = make_uuid();

        ProtocolMessage msg;
        msg.uuid = make_uuid();
        msg.msg_type = "auth1.pk";
        msg.payload["PK_A"] = to_base64(keypair_.public_der());
        msg.reply_uuid = reply_uuid_;
        msg.target_device_id = authorizer_id_;
        channel_.send_message(msg);

        phase_ = SingleAPhase::SENT_PK;
        return OobPayloadSingle{hash(keypair_.public_der()), k_sauth_};
    }

    // Awaits B's response; M2 is checked before anything is unwrapped.
    RootKey finish() {
        require_phase(SingleAPhase::SENT_PK);
        try {
            ProtocolMessage resp = channel_.await_message(reply_uuid_, opts_.timeout, opts_.stop);
            if (resp.msg_type != "auth1.resp")
                fail(ErrorCode::MalformedMessage, "expected auth1.resp");
            Bytes m1 = field_bytes(resp, "M1");
            Bytes m2 = field_bytes(resp, "M2");
            if (!opts_.skip_response_mac_check && !ct_equal(hmac(k_sauth_, m1), m2))
                fail(ErrorCode::MacMismatch, "response MAC does not verify under K_SAuth");
            RootKey rk = asym_unwrap(keypair_, m1);
            phase_ = SingleAPhase::DONE;
            return rk;
        } catch (...) {
            phase_ = SingleAPhase::FAILED;
            throw;
        }
    }

    SingleAPhase phase() const { return phase_; }
    const DeviceKeypair& keypair() const { return keypair_; }
    const SymmetricKey& k_sauth() const { return k_sauth_; }
    Bytes sent_pk_der() const { return keypair_.public_der(); }

private:
    static Bytes field_bytes(const ProtocolMessage& m, const std::string& name) {
        auto it = m.payload.find(name);
        if (it == m.payload.end()) fail(ErrorCode::MalformedMessage, "missing field " + name);
        try {
            return from_base64(it->second);
        } catch (const Error&) {
            fail(ErrorCode::MalformedMessage, "field " + name + " is not valid base64");
        }
    }
    void require_phase(SingleAPhase p) {
        if (phase_ != p) fail(ErrorCode::CryptoFailure, "state machine misuse");
    }

    StorageChannel& channel_;
    Bytes authorizer_id_;
    DeviceKeypair keypair_;
    SingleOptions opts_;
    SymmetricKey k_sauth_{};
    std::string reply_uuid_;
    SingleAPhase phase_ = SingleAPhase::INIT;
};

class SingleAuthorizer { // role B
public:
    SingleAuthorizer(StorageChannel& channel, Bytes own_device_id, RootKey rk,
                     SingleOptions opts = {})
        : channel_(channel), own_id_(std::move(own_device_id)), rk_(rk), opts_(opts) {}

    void receive_oob(const OobPayloadSingle& payload) {
        require_phase(SingleBPhase::AWAIT_OOB);
        expected_digest_ = payload.pk_digest;
        k_sauth_ = payload.session_auth_key;
        phase_ = SingleBPhase::AWAIT_PK;
    }

    // Awaits PK_A and responds. The digest check gates the response: on
    // mismatch nothing is sent at all.
    void respond() {
        require_phase(SingleBPhase::AWAIT_PK);
        try {
            ProtocolMessage pk_msg =
                channel_.await_message_for_device(own_id_, opts_.timeout, opts_.stop);
            respond_to(pk_msg);
        } catch (...) {
            phase_ = SingleBPhase::FAILED;
            throw;
        }
    }

    void respond_to(const ProtocolMessage& pk_msg) {
        require_phase(SingleBPhase::AWAIT_PK);
        try {
            if (pk_msg.msg_type != "auth1.pk")
                fail(ErrorCode::MalformedMessage, "expected auth1.pk");
            if (pk_msg.reply_uuid.empty())
                fail(ErrorCode::MalformedMessage, "initial message names no reply uuid");
            auto it = pk_msg.payload.find("PK_A");
            if (it == pk_msg.payload.end()) fail(ErrorCode::MalformedMessage, "missing field PK_A");
            Bytes pk_der;
            try {
                pk_der = from_base64(it->second);
            } catch (const Error&) {
                fail(ErrorCode::MalformedMessage, "field PK_A is not valid base64");
            }

            if (!opts_.skip_oob_digest_check && !(hash(pk_der) == expected_digest_))
                fail(ErrorCode::DigestMismatch,
                     "public key on the cloud channel does not match the OOB digest");
            received_pk_der_ = pk_der;

            Bytes m1 = asym_wrap(pk_der, rk_);
            Bytes m2 = hmac(k_sauth_, m1);

            ProtocolMessage resp;
            resp.uuid = pk_msg.reply_uuid;
            resp.msg_type = "auth1.resp";
            resp.payload["M1"] = to_base64(m1);
            resp.payload["M2"] = to_base64(m2);
            channel_.send_message(resp);
            phase_ = SingleBPhase::RESPONDED;
        } catch (...) {
            phase_ = SingleBPhase::FAILED;
            throw;
        }
    }

    SingleBPhase phase() const { return phase_; }
    const RootKey& root_key() const { return rk_; }
    const Bytes& received_pk_der() const { return received_pk_der_; }

private:
    void require_phase(SingleBPhase p) {
        if (phase_ != p) fail(ErrorCode::CryptoFailure, "state machine misuse");
    }

    StorageChannel& channel_;
    Bytes own_id_;
    RootKey rk_;
    SingleOptions opts_;
    Digest expected_digest_{};
    SymmetricKey k_sauth_{};
    Bytes received_pk_der_;
    SingleBPhase phase_ = SingleBPhase::AWAIT_OOB;
};

// Pipe-driven role drivers shared by the harness and the simulated flows.

inline RootKey run_single_new_device(OobPipe& pipe, SingleNewDevice& a) {
    OobPayloadSingle payload = a.start();
    pipe.send(OobSide::A, payload.encode());
    return a.finish();
}

inline void run_single_authorizer(OobPipe& pipe, SingleAuthorizer& b,
                                  std::chrono::milliseconds oob_timeout = std::chrono::seconds(30)) {
    b.receive_oob(OobPayloadSingle::decode(pipe.receive(OobSide::B, oob_timeout)));
    b.respond();
}

} // namespace omnivault
