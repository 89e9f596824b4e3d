#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "rfidauth/anticollision.hpp"
#include "rfidauth/crypto.hpp"
#include "rfidauth/result.hpp"
#include "rfidauth/rng.hpp"
#include "rfidauth/wire.hpp"

namespace rfidauth::protocol {

using namespace rfidauth::wire;

struct TagIdHash {
    std::size_t operator()(const TagId& id) const noexcept;
};

[[nodiscard]] std::string to_hex(std::span<const std::uint8_t> bytes);
[[nodiscard]] Bytes from_hex(std::string_view hex);

/// Deterministic 96-bit identifier for enrollment number `n`.
[[nodiscard]] TagId make_tag_id(std::uint64_t seed, std::uint64_t n);

// ---------------------------------------------------------------------------
// Tag

struct TagIdentity {
    TagId id{};
    Bytes server_pk;
};

enum class TagPhase { Idle, Arbitrating, Acknowledged, AwaitingFinal, Sleeping };

[[nodiscard]] std::string_view to_string(TagPhase phase);

struct SessionState {
    TagPhase phase = TagPhase::Idle;
    crypto::SymKey k;
    std::uint64_t cr = 0;
    std::uint64_t ct = 0;
    std::uint32_t slot = 0;
    std::uint16_t rn16 = 0;
};

struct SlotReply {
    std::uint32_t slot = 0;
    Rn16 rn16;
};

struct Accept {
    std::uint64_t sleep_us = 0;
    [[nodiscard]] double sleep_for() const { return static_cast<double>(sleep_us) * 1e-6; }
};

enum class TagReject { WrongPhase, IntegrityFailure, ChallengeMismatch };

[[nodiscard]] std::string_view to_string(TagReject r);

class TagAgent {
public:
    explicit TagAgent(TagIdentity identity, ProtocolConfig cfg = {});

    /// Step 1. Fresh k, Ct and RN16, uniform slot in [0, 2^Q). A sleeping
    /// tag stays silent. A Query mid-handshake abandons that session.
    std::optional<SlotReply> on_query(const Query& q, SeededRng& rng);

    /// Step 2 (tag side). Only accepted while Arbitrating.
    bool on_ack(const AckChallenge& ack);

    /// Step 3. R1 = E_k(ID || Cr), R2 = KEM(k || Ct).
    std::optional<AuthRequest> build_auth(SeededRng& rng);

    /// Step 8. On Accept the tag sleeps; on Reject it returns to Idle.
    Result<Accept, TagReject> on_response(const ServerResponse& resp);

    /// Response timeout or lost slot: back to Idle, session discarded.
    void abandon();
    /// End of the sleep period.
    void wake();

    [[nodiscard]] TagPhase phase() const { return s_.phase; }
    [[nodiscard]] const SessionState& session() const { return s_; }
    [[nodiscard]] const TagIdentity& identity() const { return identity_; }
    [[nodiscard]] std::uint64_t sessions_started() const { return sessions_; }

private:
    TagIdentity identity_;
    ProtocolConfig cfg_;
    SessionState s_;
    std::uint64_t sessions_ = 0;
};

// ---------------------------------------------------------------------------
// Reader

struct SleepStrategy {
    enum class Kind { Geometry, Fixed };
    Kind kind = Kind::Geometry;
    double fixed_s = 2.0;
};

/// What the reader can learn about the tag it is talking to.
struct TagObservation {
    double now = 0.0;
    /// Range-exit time from the geometry oracle, if known.
    std::optional<double> range_exit;
};

class ReaderAgent {
public:
    explicit ReaderAgent(ProtocolConfig cfg = {}, SleepStrategy sleep = {}, double initial_q = 4.0, double q_step = 0.3);

    /// Step 2. Draws a fresh Cr and caches it for the current session.
    AckChallenge ack(SeededRng& rng);

    /// Step 5. Pairs R1/R2 with the cached Cr and the sleep estimate.
    /// Throws std::logic_error if no challenge is outstanding.
    [[nodiscard]] ServerRequest forward(const AuthRequest& auth, double sleep_time_s) const;

    [[nodiscard]] double estimate_sleep_time(const TagObservation& obs) const;

    void end_session() { cr_.reset(); }
    [[nodiscard]] std::optional<std::uint64_t> pending_cr() const { return cr_; }

    [[nodiscard]] anticollision::FrameArbiter& arbiter() { return arbiter_; }
    [[nodiscard]] const anticollision::FrameArbiter& arbiter() const { return arbiter_; }
    [[nodiscard]] const SleepStrategy& sleep_strategy() const { return sleep_; }

private:
    ProtocolConfig cfg_;
    SleepStrategy sleep_;
    anticollision::FrameArbiter arbiter_;
    std::optional<std::uint64_t> cr_;
};

// ---------------------------------------------------------------------------
// Server

enum class RejectReason { KemFailure, SymFailure, UnknownId, ChallengeMismatch };

[[nodiscard]] std::string_view to_string(RejectReason r);

struct TagRecord {
    TagId id{};
    std::uint64_t enrolled_index = 0;
};

struct WorkCounters {
    std::uint64_t calls = 0;
    std::uint64_t decapsulations = 0;
    std::uint64_t sym_decryptions = 0;
};

/// Holds the curve private key and the hash-indexed tag database.
/// authenticate() only reads the database; it may run concurrently.
class AuthServer {
public:
    explicit AuthServer(crypto::CurveKeyPair keys, ProtocolConfig cfg = {});

    void enroll(const TagId& id);
    /// Removes the ID; later sessions of that tag get UnknownId.
    void revoke(const TagId& id) { db_.erase(id); }
    [[nodiscard]] bool contains(const TagId& id) const { return db_.contains(id); }
    [[nodiscard]] std::size_t size() const { return db_.size(); }
    [[nodiscard]] const Bytes& public_key() const { return keys_.public_point; }
    [[nodiscard]] const ProtocolConfig& config() const { return cfg_; }

    /// Steps 6-7. Exactly one decapsulation and one symmetric decryption per
    /// call on every path, independent of the database size.
    [[nodiscard]] Result<ServerResponse, RejectReason> authenticate(const ServerRequest& req, SeededRng& rng) const;

    /// Variant with the Cr comparison disabled; used to show what the
    /// challenge check buys.
    [[nodiscard]] Result<ServerResponse, RejectReason> authenticate_without_challenge_check(const ServerRequest& req,
                                                                                           SeededRng& rng) const;

    [[nodiscard]] WorkCounters counters() const;
    void reset_counters();

private:
    Result<ServerResponse, RejectReason> run(const ServerRequest& req, SeededRng& rng, bool check_cr) const;

    crypto::CurveKeyPair keys_;
    ProtocolConfig cfg_;
    std::unordered_map<TagId, TagRecord, TagIdHash> db_;
    mutable std::atomic<std::uint64_t> calls_{0};
    mutable std::atomic<std::uint64_t> decaps_{0};
    mutable std::atomic<std::uint64_t> sym_decrypts_{0};
};

// ---------------------------------------------------------------------------
// Transcripts

/// Everything observable on the air and backhaul for one handshake, plus
/// ground truth used only by analysis code.
struct Transcript {
    std::uint64_t session = 0;
    std::string tag_label;  ///< ground truth, never sent
    std::uint8_t q = 0;
    std::uint16_t rn16 = 0;
    std::uint64_t cr = 0;
    AuthRequest auth;
    std::uint64_t time_us = 0;
    std::optional<ServerResponse> response;
    std::optional<RejectReason> server_reject;
    std::optional<TagReject> tag_reject;
    bool accepted = false;
};

[[nodiscard]] std::string to_jsonl(const Transcript& t);
/// Throws MalformedMessage on unparsable input.
[[nodiscard]] Transcript transcript_from_jsonl(std::string_view line);

/// One interference-free Q = 0 handshake, every message passed through
/// encode/decode.
Transcript run_session(TagAgent& tag, ReaderAgent& reader, const AuthServer& server, SeededRng& rng,
                       double sleep_time_s = 1.0, std::uint64_t session = 0);

}  // namespace rfidauth::protocol
