#pragma once

// Dolev-Yao style adversary over the storage channel. The adversary owns the
// interposition hook: it sees every object, may rewrite or drop writes, and
// may inject objects of its own — but it never touches an OOB pipe. Its
// knowledge set is the symbolic closure of everything it observed: fields
// split out of messages, plus whatever opens under keys it already knows.
// Secrecy and agreement claims become assertions over finished runs.

#include <functional>
#include <random>
#include <thread>

#include "auth_pake.hpp"
#include "auth_single.hpp"

namespace omnivault {

enum class Protocol { SINGLE, PAKE };

enum class StrategyKind {
    PASSIVE,
    PK_SUBSTITUTE,
    RK_INJECT,
    REPLAY,
    TAMPER_RANDOM,
    CROSS_SESSION_SPLICE,
    PASSCODE_GUESS,
};

inline const char* protocol_name(Protocol p) { return p == Protocol::SINGLE ? "SINGLE" : "PAKE"; }

inline const char* strategy_name(StrategyKind k) {
    switch (k) {
    case StrategyKind::PASSIVE: return "PASSIVE";
    case StrategyKind::PK_SUBSTITUTE: return "PK_SUBSTITUTE";
    case StrategyKind::RK_INJECT: return "RK_INJECT";
    case StrategyKind::REPLAY: return "REPLAY";
    case StrategyKind::TAMPER_RANDOM: return "TAMPER_RANDOM";
    case StrategyKind::CROSS_SESSION_SPLICE: return "CROSS_SESSION_SPLICE";
    case StrategyKind::PASSCODE_GUESS: return "PASSCODE_GUESS";
    }
    return "?";
}

inline Protocol parse_protocol(const std::string& s) {
    if (s == "SINGLE" || s == "single") return Protocol::SINGLE;
    if (s == "PAKE" || s == "pake") return Protocol::PAKE;
    fail(ErrorCode::CryptoFailure, "unknown protocol: " + s);
}

inline StrategyKind parse_strategy(const std::string& s) {
    for (auto k : {StrategyKind::PASSIVE, StrategyKind::PK_SUBSTITUTE, StrategyKind::RK_INJECT,
                   StrategyKind::REPLAY, StrategyKind::TAMPER_RANDOM,
                   StrategyKind::CROSS_SESSION_SPLICE, StrategyKind::PASSCODE_GUESS})
        if (s == strategy_name(k)) return k;
    fail(ErrorCode::CryptoFailure, "unknown strategy: " + s);
}

// One long-lived RSA identity for the adversary; generating a fresh one per
// simulated run would say nothing and cost a keygen each time.
inline const DeviceKeypair& adversary_keypair() {
    static const DeviceKeypair kp = DeviceKeypair::generate();
    return kp;
}

// ---- symbolic knowledge ----

class KnowledgeSet {
public:
    bool add(BytesView b) {
        if (b.empty()) return false;
        return atoms_.insert(Bytes(b.begin(), b.end())).second;
    }

    void add_private_key(const DeviceKeypair& kp) {
        private_keys_.push_back(kp);
        add(to_bytes(kp.private_pem()));
    }

    // Knowledge holds values, not spellings. A message is split into its
    // fields and each field is stored decoded (hex -> integer bytes, base64
    // -> bytes); the textual rendering itself is kept only when it decodes as
    // neither. Keeping hex/base64 text as atoms would let the substring check
    // "find" a low-entropy secret like a 6-digit passcode inside the hex
    // spelling of an unrelated group element (6 hex chars = 24 bits, so a
    // chance hit every few hundred thousand positions) — a false alarm, since
    // those characters encode part of alpha, not the passcode. Anything the
    // adversary could really extract from the text survives decoding, so
    // nothing knowable is lost. Non-message objects stay as raw atoms.
    void observe_object(BytesView data) {
        auto j = nlohmann::json::parse(to_string(data), nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("payload")) {
            add(data);
            return;
        }
        for (auto& [name, val] : j["payload"].items()) {
            if (!val.is_string()) continue;
            std::string v = val.get<std::string>();
            bool decoded = false;
            bool all_hex = !v.empty();
            for (char c : v) all_hex = all_hex && hex_nibble(c) >= 0;
            if (all_hex) {
                add(BigNum::from_hex(v).to_bytes());
                decoded = true;
            }
            try {
                add(from_base64(v));
                decoded = true;
            } catch (const Error&) {
            }
            if (!decoded) add(to_bytes(v));
        }
    }

    // Fixpoint closure: open any observed blob with any observed key-sized
    // atom (AEAD, associated data empty or any digest-sized atom) and unwrap
    // any RSA-sized atom with any private key the adversary holds.
    void close() {
        bool grew = true;
        while (grew) {
            grew = false;
            std::vector<Bytes> keys, blobs, ads;
            for (const auto& a : atoms_) {
                if (a.size() == 16 || a.size() == 32) keys.push_back(a);
                if (a.size() >= AEAD_OVERHEAD) blobs.push_back(a);
                if (a.size() == DIGEST_LEN) ads.push_back(a);
            }
            ads.emplace_back(); // the empty associated data
            for (const auto& blob : blobs) {
                for (const auto& key : keys) {
                    for (const auto& ad : ads) {
                        try {
                            grew |= add(aead_open(key, AeadBlob::parse(blob), ad));
                        } catch (const Error&) {
                        }
                    }
                }
                if (blob.size() == RSA_BITS / 8) {
                    for (const auto& kp : private_keys_) {
                        try {
                            grew |= add(asym_unwrap(kp, blob).view());
                        } catch (const Error&) {
                        }
                    }
                }
            }
        }
    }

    // Splitting closure: knowing an atom means knowing every substring of it.
    bool knows(BytesView needle) const {
        if (needle.empty()) return false;
        for (const auto& a : atoms_) {
            if (a.size() < needle.size()) continue;
            if (std::search(a.begin(), a.end(), needle.begin(), needle.end()) != a.end())
                return true;
        }
        return false;
    }

    size_t size() const { return atoms_.size(); }

private:
    std::set<Bytes> atoms_;
    std::vector<DeviceKeypair> private_keys_;
};

// ---- the adversary itself: an interceptor with a plan ----

class AdversaryAgent : public Interceptor {
public:
    AdversaryAgent(Protocol proto, StrategyKind kind, uint64_t seed, Backend& backend,
                   Bytes authorizer_id, const SrpGroup& grp)
        : proto_(proto), kind_(kind), rng_(seed), backend_(backend),
          authorizer_id_(std::move(authorizer_id)), grp_(grp) {
        if (kind_ == StrategyKind::TAMPER_RANDOM)
            tamper_target_ = rng_() % (proto_ == Protocol::SINGLE ? 2 : 4);
        if (kind_ == StrategyKind::CROSS_SESSION_SPLICE)
            splice_target_ = rng_() % (proto_ == Protocol::SINGLE ? 2 : 3);
    }

    void begin_recording() { recording_ = true; }
    void end_recording() { recording_ = false; }

    KnowledgeSet take_knowledge() { return std::move(knowledge_); }
    std::vector<std::pair<std::string, Bytes>> take_transcript() { return std::move(transcript_); }
    bool guess_succeeded() const { return guess_succeeded_; }

    bool on_put(const std::string& key, Bytes& data) override {
        std::lock_guard lk(m_);
        transcript_.emplace_back(key, data);
        knowledge_.observe_object(data);
        if (injecting_) return true; // own traffic passes untouched
        if (!key.starts_with(MESSAGES_PREFIX)) return true;

        auto j = nlohmann::json::parse(to_string(data), nullptr, false);
        if (j.is_discarded() || !j.is_object()) return true;
        std::string type = j.value("msg_type", "");

        if (recording_) {
            if (j.contains("payload")) recorded_[type] = j["payload"];
            return true;
        }

        switch (kind_) {
        case StrategyKind::PASSIVE: return true;
        case StrategyKind::PK_SUBSTITUTE: return pk_substitute(j, data, type);
        case StrategyKind::RK_INJECT: return rk_inject(j, data, type);
        case StrategyKind::REPLAY: return replay(j, data, type);
        case StrategyKind::TAMPER_RANDOM: return tamper(j, data, type);
        case StrategyKind::CROSS_SESSION_SPLICE: return splice(j, data, type);
        case StrategyKind::PASSCODE_GUESS: return passcode_guess(j, data, type);
        }
        return true;
    }

private:
    void rewrite(nlohmann::json& j, Bytes& data) { data = to_bytes(j.dump()); }

    void inject(const ProtocolMessage& msg) {
        injecting_ = true;
        try {
            backend_.put(msg.object_key(), msg.serialize());
        } catch (...) {
        }
        injecting_ = false;
    }

    BigNum seeded_exponent() {
        Bytes b(32);
        for (auto& x : b) x = uint8_t(rng_());
        BigNum e = BigNum::from_bytes(b).mod(grp_.N);
        return e.is_zero() ? BigNum(2) : e;
    }

    BigNum fresh_public() {
        const BigNum one(1), top = grp_.N - BigNum(1);
        for (;;) {
            adv_exp_ = seeded_exponent();
            BigNum alpha = grp_.g.mod_exp(adv_exp_, grp_.N);
            if (!alpha.is_zero() && !(alpha == one) && !(alpha == top)) return alpha;
        }
    }

    // -- strategies --

    bool pk_substitute(nlohmann::json& j, Bytes& data, const std::string& type) {
        if (proto_ == Protocol::SINGLE && type == "auth1.pk") {
            knowledge_.add_private_key(adversary_keypair());
            j["payload"]["PK_A"] = to_base64(adversary_keypair().public_der());
            rewrite(j, data);
        } else if (proto_ == Protocol::PAKE && type == "srp.alpha") {
            j["payload"]["alpha"] = fresh_public().to_hex();
            rewrite(j, data);
        }
        return true;
    }

    bool rk_inject(nlohmann::json& j, Bytes& data, const std::string& type) {
        if (proto_ == Protocol::SINGLE) {
            if (type == "auth1.pk") {
                // wrap our own key under the observed PK and race the honest reply
                Bytes pk_der = from_base64(j["payload"]["PK_A"].get<std::string>());
                Bytes rk_evil = random_seeded(16);
                knowledge_.add(rk_evil);
                ProtocolMessage forged;
                forged.uuid = j.value("reply_uuid", "");
                forged.msg_type = "auth1.resp";
                Bytes m1 = asym_wrap(pk_der, SymmetricKey::from_bytes(rk_evil));
                forged.payload["M1"] = to_base64(m1);
                forged.payload["M2"] = to_base64(hmac(random_seeded(16), m1));
                inject(forged);
                return true;
            }
            if (type == "auth1.resp") return false; // drop the honest response
        } else if (type == "srp.m2_rk") {
            // replace the sealed key; the proof field stays honest
            Bytes adv_key = random_seeded(16);
            Bytes rk_evil = random_seeded(16);
            knowledge_.add(adv_key);
            knowledge_.add(rk_evil);
            Bytes m2 = from_base64(j["payload"]["M2"].get<std::string>());
            j["payload"]["C"] = to_base64(aead_seal(adv_key, rk_evil, m2).serialize());
            rewrite(j, data);
        }
        return true;
    }

    bool replay(nlohmann::json& j, Bytes& data, const std::string& type) {
        auto it = recorded_.find(type);
        if (it == recorded_.end()) return true;
        bool hit = false;
        for (const char* f : {"PK_A", "alpha", "M1"}) {
            if (j["payload"].contains(f) && it->second.contains(f)) {
                j["payload"][f] = it->second[f];
                hit = true;
            }
        }
        if (hit) rewrite(j, data);
        return true;
    }

    bool tamper(nlohmann::json& j, Bytes& data, const std::string&) {
        if (message_index_++ != tamper_target_ || !j.contains("payload")) return true;
        std::vector<std::string> fields;
        for (auto& [name, val] : j["payload"].items())
            if (val.is_string()) fields.push_back(name);
        if (fields.empty()) return true;
        size_t pick = rng_() % (fields.size() + 1);
        if (pick == fields.size()) {
            // corrupt the uuid so the filename cross-check trips
            std::string u = j.value("uuid", "");
            if (u.empty()) return true;
            size_t at = rng_() % u.size();
            u[at] = u[at] == 'f' ? '0' : 'f';
            j["uuid"] = u;
        } else {
            const std::string& name = fields[pick];
            std::string v = j["payload"][name].get<std::string>();
            if (name == "alpha" || name == "beta") {
                size_t at = rng_() % v.size();
                static const char* digits = "0123456789abcdef";
                char repl = digits[rng_() % 16];
                while (repl == v[at]) repl = digits[rng_() % 16];
                v[at] = repl;
                j["payload"][name] = v;
            } else {
                Bytes raw = from_base64(v);
                if (raw.empty()) return true;
                raw[rng_() % raw.size()] ^= uint8_t(1 << (rng_() % 8));
                j["payload"][name] = to_base64(raw);
            }
        }
        rewrite(j, data);
        return true;
    }

    bool splice(nlohmann::json& j, Bytes& data, const std::string& type) {
        static const char* single_types[] = {"auth1.pk", "auth1.resp"};
        static const char* pake_types[] = {"srp.beta_s", "srp.m1", "srp.m2_rk"};
        std::string target = proto_ == Protocol::SINGLE ? single_types[splice_target_]
                                                        : pake_types[splice_target_];
        if (type != target) return true;
        auto it = recorded_.find(type);
        if (it == recorded_.end()) return true;
        for (auto& [name, val] : it->second.items())
            if (j["payload"].contains(name)) j["payload"][name] = val;
        rewrite(j, data);
        return true;
    }

    bool passcode_guess(nlohmann::json& j, Bytes& data, const std::string& type) {
        (void)data;
        if (type == "srp.alpha") {
            // suppress the honest opener and run the A role under a guess
            ProtocolMessage mine;
            mine.uuid = make_uuid();
            mine.msg_type = "srp.alpha";
            adv_alpha_ = fresh_public();
            mine.payload["alpha"] = adv_alpha_.to_hex();
            adv_reply_uuid_ = make_uuid();
            mine.reply_uuid = adv_reply_uuid_;
            mine.target_device_id = authorizer_id_;
            inject(mine);
            return false;
        }
        if (type == "srp.beta_s" && j.value("uuid", "") == adv_reply_uuid_) {
            BigNum beta = BigNum::from_hex(j["payload"]["beta"].get<std::string>());
            Bytes salt = from_base64(j["payload"]["s"].get<std::string>());
            uint32_t g6 = std::uniform_int_distribution<uint32_t>(0, 999999)(rng_);
            char buf[8];
            std::snprintf(buf, sizeof buf, "%06u", g6);
            knowledge_.add(to_bytes(std::string(buf)));

            BigNum k = srp::compute_k(grp_);
            BigNum x = srp::compute_x(salt, buf);
            BigNum u = srp::compute_u(grp_, adv_alpha_, beta);
            BigNum sigma = srp::client_sigma(grp_, beta, k, x, adv_exp_, u);
            adv_session_key_ = srp::derive_session_key(grp_, sigma);
            knowledge_.add(adv_session_key_.view());

            ProtocolMessage m1_msg;
            m1_msg.uuid = j.value("reply_uuid", "");
            m1_msg.msg_type = "srp.m1";
            m1_msg.payload["M1"] = to_base64(srp::proof_m1(grp_, adv_alpha_, beta, adv_session_key_));
            m1_msg.reply_uuid = make_uuid();
            inject(m1_msg);
            return true;
        }
        if (type == "srp.m2_rk") {
            // B released key material: the guess was right
            try {
                Bytes m2 = from_base64(j["payload"]["M2"].get<std::string>());
                Bytes c = from_base64(j["payload"]["C"].get<std::string>());
                knowledge_.add(aead_open(adv_session_key_, AeadBlob::parse(c), m2));
                guess_succeeded_ = true;
            } catch (const Error&) {
            }
        }
        return true;
    }

    Bytes random_seeded(size_t n) {
        Bytes b(n);
        for (auto& x : b) x = uint8_t(rng_());
        return b;
    }

    Protocol proto_;
    StrategyKind kind_;
    std::mt19937_64 rng_;
    Backend& backend_;
    Bytes authorizer_id_;
    const SrpGroup& grp_;

    std::recursive_mutex m_;
    bool injecting_ = false;
    bool recording_ = false;
    std::map<std::string, nlohmann::json> recorded_;
    size_t message_index_ = 0;
    size_t tamper_target_ = 0;
    size_t splice_target_ = 0;

    BigNum adv_exp_, adv_alpha_;
    std::string adv_reply_uuid_;
    SymmetricKey adv_session_key_{};
    bool guess_succeeded_ = false;

    KnowledgeSet knowledge_;
    std::vector<std::pair<std::string, Bytes>> transcript_;
};

// ---- running protocols under an adversary ----

struct HarnessOptions {
    std::chrono::milliseconds role_timeout = std::chrono::seconds(2);
    const SrpGroup* group = &SrpGroup::production();
    // Canary weakenings of the honest machines; prove the harness has teeth.
    bool weaken_skip_oob_digest = false;
    bool weaken_skip_response_mac = false;
    bool weaken_skip_m1 = false;
    bool weaken_skip_m2 = false;
};

struct RoleOutcome {
    std::string phase;
    std::optional<ErrorCode> error;
};

struct RunOutcome {
    Protocol protocol{};
    StrategyKind strategy{};
    uint64_t seed = 0;
    RoleOutcome a, b;
    bool a_accepted = false;    // A terminated DONE
    bool b_responded = false;   // B terminated RESPONDED
    bool a_key_matches = false; // A's accepted key equals the domain root key
    bool b_sent_rk_material = false;
    bool transcripts_match = true; // authenticated fields agree on mutual success
    bool guess_succeeded = false;  // PASSCODE_GUESS only
    std::vector<std::pair<std::string, Bytes>> transcript;
    KnowledgeSet knowledge;
    std::vector<Bytes> secrets; // RK, K_SAuth / K_ses / P harvested from the run
};

namespace detail {

inline const char* phase_str(SingleAPhase p) {
    switch (p) {
    case SingleAPhase::INIT: return "INIT";
    case SingleAPhase::SENT_PK: return "SENT_PK";
    case SingleAPhase::DONE: return "DONE";
    case SingleAPhase::FAILED: return "FAILED";
    }
    return "?";
}
inline const char* phase_str(SingleBPhase p) {
    switch (p) {
    case SingleBPhase::AWAIT_OOB: return "AWAIT_OOB";
    case SingleBPhase::AWAIT_PK: return "AWAIT_PK";
    case SingleBPhase::RESPONDED: return "RESPONDED";
    case SingleBPhase::FAILED: return "FAILED";
    }
    return "?";
}
inline const char* phase_str(PakeAPhase p) {
    switch (p) {
    case PakeAPhase::INIT: return "INIT";
    case PakeAPhase::SENT_ALPHA: return "SENT_ALPHA";
    case PakeAPhase::SENT_M1: return "SENT_M1";
    case PakeAPhase::DONE: return "DONE";
    case PakeAPhase::FAILED: return "FAILED";
    }
    return "?";
}
inline const char* phase_str(PakeBPhase p) {
    switch (p) {
    case PakeBPhase::AWAIT_ALPHA: return "AWAIT_ALPHA";
    case PakeBPhase::AWAIT_M1: return "AWAIT_M1";
    case PakeBPhase::RESPONDED: return "RESPONDED";
    case PakeBPhase::FAILED: return "FAILED";
    }
    return "?";
}

inline bool nonzero(BytesView b) {
    for (uint8_t x : b)
        if (x) return true;
    return false;
}

inline void exec_single(StorageChannel& channel, const Bytes& dev_b, const RootKey& rk,
                        const HarnessOptions& opts, RunOutcome* out) {
    std::stop_source stops;
    SingleOptions oa;
    oa.timeout = opts.role_timeout;
    oa.stop = stops.get_token();
    oa.skip_response_mac_check = opts.weaken_skip_response_mac;
    SingleOptions ob = oa;
    ob.skip_response_mac_check = false;
    ob.skip_oob_digest_check = opts.weaken_skip_oob_digest;

    SingleNewDevice a(channel, dev_b, DeviceKeypair::generate(), oa);
    SingleAuthorizer b(channel, dev_b, rk, ob);
    OobPipe pipe(OobDirection::A_TO_B, OobCapacity::QR_48B);

    RootKey got{};
    std::optional<ErrorCode> a_err, b_err;
    std::jthread tb([&] {
        try {
            run_single_authorizer(pipe, b, opts.role_timeout);
        } catch (const Error& e) {
            b_err = e.code();
            stops.request_stop();
        }
    });
    try {
        got = run_single_new_device(pipe, a);
    } catch (const Error& e) {
        a_err = e.code();
        stops.request_stop();
    }
    tb.join();

    if (!out) return;
    out->a = {phase_str(a.phase()), a_err};
    out->b = {phase_str(b.phase()), b_err};
    out->a_accepted = a.phase() == SingleAPhase::DONE;
    out->b_responded = b.phase() == SingleBPhase::RESPONDED;
    out->b_sent_rk_material = out->b_responded;
    out->a_key_matches = out->a_accepted && got == rk;
    if (out->a_accepted && out->b_responded)
        out->transcripts_match = a.sent_pk_der() == b.received_pk_der();
    out->secrets.push_back(Bytes(rk.bytes.begin(), rk.bytes.end()));
    if (nonzero(a.k_sauth().view()))
        out->secrets.push_back(Bytes(a.k_sauth().bytes.begin(), a.k_sauth().bytes.end()));
}

inline void exec_pake(StorageChannel& channel, const Bytes& dev_b, const RootKey& rk,
                      const HarnessOptions& opts, RunOutcome* out) {
    std::stop_source stops;
    PakeOptions oa;
    oa.group = opts.group;
    oa.timeout = opts.role_timeout;
    oa.stop = stops.get_token();
    oa.skip_m2_check = opts.weaken_skip_m2;
    PakeOptions ob = oa;
    ob.skip_m2_check = false;
    ob.skip_m1_check = opts.weaken_skip_m1;

    PakeNewDevice a(channel, dev_b, oa);
    PakeAuthorizer b(channel, dev_b, rk, ob);
    OobPipe pipe(OobDirection::A_TO_B, OobCapacity::PASSCODE_6D);

    RootKey got{};
    std::optional<ErrorCode> a_err, b_err;
    std::jthread tb([&] {
        try {
            run_pake_authorizer(pipe, b, opts.role_timeout);
        } catch (const Error& e) {
            b_err = e.code();
            stops.request_stop();
        }
    });
    try {
        got = run_pake_new_device(pipe, a);
    } catch (const Error& e) {
        a_err = e.code();
        stops.request_stop();
    }
    tb.join();

    if (!out) return;
    out->a = {phase_str(a.phase()), a_err};
    out->b = {phase_str(b.phase()), b_err};
    out->a_accepted = a.phase() == PakeAPhase::DONE;
    out->b_responded = b.phase() == PakeBPhase::RESPONDED;
    out->b_sent_rk_material = b.sent_rk_material();
    out->a_key_matches = out->a_accepted && got == rk;
    if (out->a_accepted && out->b_responded)
        out->transcripts_match = a.alpha() == b.alpha() && a.beta() == b.beta() &&
                                 a.session_key() == b.session_key();
    out->secrets.push_back(Bytes(rk.bytes.begin(), rk.bytes.end()));
    if (!a.passcode().empty()) out->secrets.push_back(to_bytes(a.passcode()));
    if (nonzero(a.session_key().view()))
        out->secrets.push_back(
            Bytes(a.session_key().bytes.begin(), a.session_key().bytes.end()));
    if (nonzero(b.session_key().view()))
        out->secrets.push_back(
            Bytes(b.session_key().bytes.begin(), b.session_key().bytes.end()));
}

} // namespace detail

inline RunOutcome run_authorization(Protocol proto, StrategyKind kind, uint64_t seed,
                                    HarnessOptions opts = {}) {
    if (proto == Protocol::SINGLE && kind == StrategyKind::PASSCODE_GUESS)
        fail(ErrorCode::CryptoFailure, "PASSCODE_GUESS targets the passcode protocol");

    MemoryBackend backend;
    StorageChannel channel(backend);
    const Bytes dev_b = from_hex("b0b0b0b0b0b0b0b0");
    RootKey rk = RootKey::random();

    AdversaryAgent adv(proto, kind, seed, backend, dev_b, *opts.group);
    backend.set_interceptor(&adv);

    RunOutcome out;
    out.protocol = proto;
    out.strategy = kind;
    out.seed = seed;

    if (kind == StrategyKind::REPLAY || kind == StrategyKind::CROSS_SESSION_SPLICE) {
        adv.begin_recording();
        if (proto == Protocol::SINGLE)
            detail::exec_single(channel, dev_b, rk, opts, nullptr);
        else
            detail::exec_pake(channel, dev_b, rk, opts, nullptr);
        adv.end_recording();
    }

    if (proto == Protocol::SINGLE)
        detail::exec_single(channel, dev_b, rk, opts, &out);
    else
        detail::exec_pake(channel, dev_b, rk, opts, &out);

    out.guess_succeeded = adv.guess_succeeded();
    out.transcript = adv.take_transcript();
    out.knowledge = adv.take_knowledge();
    out.knowledge.close();
    return out;
}

// Secrecy: none of the run's secrets (nor anything containing them) closed
// into the adversary's knowledge.
inline bool assert_secrecy(const RunOutcome& out) {
    for (const auto& s : out.secrets)
        if (out.knowledge.knows(s)) return false;
    return true;
}

// Agreement: success means the domain's key, and on mutual success both roles
// saw the same authenticated fields.
inline bool assert_agreement(const RunOutcome& out) {
    if (out.a_accepted && !out.a_key_matches) return false;
    if (out.a_accepted && out.b_responded && !out.transcripts_match) return false;
    return true;
}

// Reachability: the honest configuration actually completes.
inline bool assert_reachable(Protocol proto, HarnessOptions opts = {}) {
    RunOutcome out = run_authorization(proto, StrategyKind::PASSIVE, 0, opts);
    return out.a_accepted && out.b_responded && out.a_key_matches && assert_secrecy(out) &&
           assert_agreement(out);
}

inline nlohmann::json to_json(const RunOutcome& out) {
    nlohmann::json j;
    j["protocol"] = protocol_name(out.protocol);
    j["strategy"] = strategy_name(out.strategy);
    j["seed"] = out.seed;
    j["a_phase"] = out.a.phase;
    j["b_phase"] = out.b.phase;
    if (out.a.error) j["a_error"] = error_name(*out.a.error);
    if (out.b.error) j["b_error"] = error_name(*out.b.error);
    j["a_accepted"] = out.a_accepted;
    j["b_responded"] = out.b_responded;
    j["a_key_matches"] = out.a_key_matches;
    j["b_sent_rk_material"] = out.b_sent_rk_material;
    j["secrecy"] = assert_secrecy(out);
    j["agreement"] = assert_agreement(out);
    j["knowledge_atoms"] = out.knowledge.size();
    j["transcript_objects"] = out.transcript.size();
    if (out.strategy == StrategyKind::PASSCODE_GUESS) j["guess_succeeded"] = out.guess_succeeded;
    return j;
}

} // namespace omnivault
