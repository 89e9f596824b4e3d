#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfidauth/protocol.hpp"
#include "rfidauth/simcore.hpp"

namespace rfidauth::adversary {

using protocol::Transcript;

enum class Attack { Replay, Resend, ImpersonateTag, ImpersonateReader, Tracking };

[[nodiscard]] std::string_view to_string(Attack a);

struct AttackVerdict {
    Attack attack = Attack::Replay;
    std::string variant;
    std::uint64_t attempts = 0;
    /// Accepts obtained by the adversary (correct guesses for Tracking).
    std::uint64_t successes = 0;
    /// How each attempt ended, keyed by reject reason or outcome name.
    std::map<std::string, std::uint64_t> outcomes;

    // Tracking only.
    std::optional<double> distinct_fraction;
    std::optional<double> accuracy;
    std::optional<double> sigma;
    std::optional<bool> linkable;

    [[nodiscard]] std::string to_json() const;
};

class InsufficientData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A live deployment the attacks run against: one server, a handful of
/// enrolled tags (optionally padded with filler IDs) and an honest reader.
class Testbed {
public:
    explicit Testbed(std::uint64_t seed, std::size_t tags = 8, std::size_t database_size = 0,
                     protocol::ProtocolConfig cfg = {});

    /// One honest, interference-free handshake with tag `index`.
    Transcript honest_session(std::size_t index);
    /// `n` honest sessions, cycling over the tags.
    std::vector<Transcript> record(std::size_t n);

    [[nodiscard]] protocol::AuthServer& server() { return *server_; }
    [[nodiscard]] protocol::ReaderAgent& reader() { return reader_; }
    [[nodiscard]] SeededRng& rng() { return rng_; }
    [[nodiscard]] const protocol::ProtocolConfig& config() const { return cfg_; }
    [[nodiscard]] std::size_t tag_count() const { return tags_.size(); }
    [[nodiscard]] protocol::TagAgent& tag(std::size_t index) { return tags_.at(index); }
    /// Tag whose ID hex-encodes to `label`; throws std::out_of_range.
    [[nodiscard]] protocol::TagAgent& tag_by_label(const std::string& label);

private:
    protocol::ProtocolConfig cfg_;
    SeededRng rng_;
    std::unique_ptr<protocol::AuthServer> server_;
    std::vector<protocol::TagAgent> tags_;
    protocol::ReaderAgent reader_;
    std::uint64_t sessions_ = 0;
};

enum class ReplayMode {
    FullSession,        ///< recorded R1/R2 injected into a new reader session
    ResponseToNewTag,   ///< recorded B delivered to a fresh session of its tag
    DuplicateDelivery,  ///< B delivered twice within one session
};

enum class ResendMode {
    LaterFrame,             ///< overheard R1/R2 sent again in a later frame
    RogueReaderOriginalCr,  ///< rogue reader reuses the overheard Cr, has no server
    RevokedId,              ///< resend after the ID left the database
};

enum class ImpersonationMode { FakeTag, FakeReaderRandomB, FakeReaderOldB };

/// `recorded` must contain accepted honest transcripts of tags in `bed`.
/// `server_checks_challenge = false` runs against a server with the Cr
/// comparison disabled (mutation check).
AttackVerdict replay_attack(Testbed& bed, std::span<const Transcript> recorded, std::size_t attempts, ReplayMode mode,
                            bool server_checks_challenge = true);

AttackVerdict resend_attack(Testbed& bed, std::span<const Transcript> recorded, std::size_t attempts, ResendMode mode);

AttackVerdict impersonation_attack(Testbed& bed, std::size_t attempts, ImpersonationMode mode,
                                   std::span<const Transcript> recorded = {});

/// Linkage test on on-air R1/R2 bytes. Throws InsufficientData below 100
/// sessions per side.
AttackVerdict tracking_distinguisher(std::span<const Transcript> a, std::span<const Transcript> b, SeededRng& rng);

inline constexpr std::size_t kMinTrackingSessions = 100;

/// Sessions of a deliberately broken tag: static key, constant IV and the ID
/// alone in the first plaintext block. Used to show the tracking harness
/// is not vacuous.
std::vector<Transcript> weakened_sessions(const protocol::TagIdentity& tag, std::size_t n, SeededRng& rng,
                                          const protocol::ProtocolConfig& cfg = {});

/// Reads JSON-lines transcripts; blank lines are skipped. Throws
/// wire::MalformedMessage naming the offending line.
std::vector<Transcript> load_transcripts(std::istream& in);

struct DosRow {
    std::size_t responders = 0;
    std::optional<double> read_ratio;
    std::uint64_t server_rejects = 0;
    std::uint64_t adversary_accepts = 0;
};

/// Runs `base` once per responder count. Measured only, no pass/fail bound.
std::vector<DosRow> dos_load_test(const sim::Scenario& base, std::span<const std::size_t> responders);

}  // namespace rfidauth::adversary
