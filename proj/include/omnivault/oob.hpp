#pragma once

// Out-of-band channels: authenticated, confidential, adversary-inaccessible
// local pipes with hard bandwidth classes (QR-scan payloads, typed passcodes,
// unbounded peering). The network adversary never sees these bytes — nothing
// here touches a storage interceptor.

#include <condition_variable>
#include <deque>
#include <mutex>

#include "crypto.hpp"

namespace omnivault {

// 48-byte QR-class payload: H(PK_A) ‖ K_SAuth.
struct OobPayloadSingle {
    Digest pk_digest;
    SymmetricKey session_auth_key;

    static constexpr size_t SIZE = DIGEST_LEN + KEY_LEN; // 48

    Bytes encode() const {
        Bytes out;
        out.reserve(SIZE);
        out.insert(out.end(), pk_digest.bytes.begin(), pk_digest.bytes.end());
        out.insert(out.end(), session_auth_key.bytes.begin(), session_auth_key.bytes.end());
        return out;
    }

    static OobPayloadSingle decode(BytesView b) {
        if (b.size() != SIZE) fail(ErrorCode::BadLength, "single-RTT OOB payload must be 48 bytes");
        OobPayloadSingle p;
        p.pk_digest = Digest::from_bytes(b.subspan(0, DIGEST_LEN));
        p.session_auth_key = SymmetricKey::from_bytes(b.subspan(DIGEST_LEN));
        return p;
    }
};

enum class OobDirection { A_TO_B, BIDIRECTIONAL };
enum class OobCapacity { QR_48B, PASSCODE_6D, PEERING_UNBOUNDED };
enum class OobSide { A, B };

// Synchronous rendezvous between exactly two endpoints. Capacity enforcement
// is exact, not advisory.
class OobPipe {
public:
    OobPipe(OobDirection dir, OobCapacity cap) : dir_(dir), cap_(cap) {}

    void send(OobSide from, BytesView data) {
        if (dir_ == OobDirection::A_TO_B && from != OobSide::A)
            fail(ErrorCode::PipeFailure, "pipe is uni-directional A->B");
        check_capacity(data);
        {
            std::lock_guard lk(mutex_);
            queue(from).emplace_back(data.begin(), data.end());
        }
        cv_.notify_all();
    }

    Bytes receive(OobSide at, std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
        if (dir_ == OobDirection::A_TO_B && at != OobSide::B)
            fail(ErrorCode::PipeFailure, "pipe is uni-directional A->B");
        OobSide from = at == OobSide::A ? OobSide::B : OobSide::A;
        std::unique_lock lk(mutex_);
        if (!cv_.wait_for(lk, timeout, [&] { return !queue(from).empty(); }))
            fail(ErrorCode::TimedOut, "no OOB transfer arrived");
        Bytes out = std::move(queue(from).front());
        queue(from).pop_front();
        return out;
    }

    OobCapacity capacity() const { return cap_; }

private:
    void check_capacity(BytesView data) const {
        switch (cap_) {
        case OobCapacity::QR_48B:
            if (data.size() > 48) fail(ErrorCode::CapacityExceeded, "QR class carries at most 48 bytes");
            break;
        case OobCapacity::PASSCODE_6D: {
            if (data.size() != 6) fail(ErrorCode::CapacityExceeded, "passcode class carries exactly 6 digits");
            for (uint8_t c : data)
                if (c < '0' || c > '9')
                    fail(ErrorCode::CapacityExceeded, "passcode class carries ASCII digits only");
            break;
        }
        case OobCapacity::PEERING_UNBOUNDED:
            break;
        }
    }

    std::deque<Bytes>& queue(OobSide from) { return from == OobSide::A ? a_to_b_ : b_to_a_; }

    OobDirection dir_;
    OobCapacity cap_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<Bytes> a_to_b_, b_to_a_;
};

// CLI rendering of the 48-byte class: unpadded base32, paste-friendly.
inline std::string render_oob_string(const OobPayloadSingle& p) { return to_base32(p.encode()); }

inline OobPayloadSingle parse_oob_string(const std::string& s) {
    Bytes raw;
    try {
        raw = from_base32(s);
    } catch (const Error&) {
        fail(ErrorCode::BadLength, "OOB string is not valid base32");
    }
    return OobPayloadSingle::decode(raw);
}

} // namespace omnivault
