#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfidauth/anticollision.hpp"
#include "rfidauth/protocol.hpp"
#include "rfidauth/radio.hpp"
#include "rfidauth/traffic.hpp"

namespace rfidauth::sim {

/// Invalid scenario parameters. `line` is 0 when the value did not come from
/// a config file.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& what, std::size_t line = 0);
    [[nodiscard]] const std::string& field() const { return field_; }
    [[nodiscard]] std::size_t line() const { return line_; }

private:
    std::string field_;
    std::size_t line_;
};

enum class ProtocolProfile {
    Hybrid,
    /// Same state machines, but the post-RN16 airtime is stretched so the
    /// whole handshake lasts `baseline_handshake_bits` bit-times.
    BaselineTiming,
};

[[nodiscard]] std::string_view to_string(ProtocolProfile p);

struct Scenario {
    traffic::TrafficModel traffic = traffic::TrafficModel::preset(traffic::TrafficModelName::Medium);
    /// No vehicles at all; the reader only runs its scan cycle.
    bool empty_road = false;
    radio::RadioParams radio;
    protocol::ProtocolConfig protocol;
    protocol::SleepStrategy sleep_strategy;
    ProtocolProfile profile = ProtocolProfile::Hybrid;

    double server_delay_s = 0.0;  ///< one way
    double duration_s = 120.0;
    std::uint64_t seed = 42;
    bool sleep_enabled = true;
    double reader_scan_period_s = 0.1;
    double approach_distance_m = 15.0;
    double warmup_s = 5.0;
    double initial_q = 4.0;
    double q_step = 0.3;
    double turnaround_s = 62.5e-6;
    double idle_slot_fraction = 0.5;
    std::size_t baseline_handshake_bits = 1700;
    /// Fake tags parked in range that answer every Query (load test).
    std::size_t adversarial_responders = 0;

    /// Throws ConfigError on the first invalid field.
    void validate() const;
};

enum class EventKind {
    VehicleEnter,
    VehicleExit,
    FrameStart,
    SlotBoundary,
    MessageDelivery,
    ServerReply,
    TagWake,
    ReaderScan,
    SimEnd,
};

[[nodiscard]] std::string_view to_string(EventKind k);

struct Event {
    double time = 0.0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::SimEnd;
    std::uint64_t subject = 0;  ///< tag index, slot index or stage, by kind
    std::uint64_t token = 0;    ///< guards against stale events
};

/// Min-queue on (time, seq). seq is assigned at scheduling time.
class EventQueue {
public:
    /// Throws std::logic_error for times earlier than the last popped event.
    std::uint64_t schedule(double time, EventKind kind, std::uint64_t subject = 0, std::uint64_t token = 0);
    [[nodiscard]] bool empty() const { return heap_.empty(); }
    [[nodiscard]] std::size_t size() const { return heap_.size(); }
    Event pop();
    [[nodiscard]] double now() const { return now_; }

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            return a.time != b.time ? a.time > b.time : a.seq > b.seq;
        }
    };
    std::priority_queue<Event, std::vector<Event>, Later> heap_;
    std::uint64_t next_seq_ = 0;
    double now_ = 0.0;
};

/// Summary statistic; empty when `n == 0`.
struct Stat {
    std::uint64_t n = 0;
    double min = 0.0;
    double mean = 0.0;
    double p95 = 0.0;
    double max = 0.0;

    static Stat of(std::vector<double> values);
};

struct TagOutcome {
    std::uint32_t vehicle = 0;
    std::uint32_t lane = 0;
    double enter = 0.0;
    double exit = 0.0;
    bool eligible = false;  ///< passage fully inside [warmup, duration]
    bool authenticated = false;
    bool in_progress = false;
    std::uint32_t authentications = 0;
    double awake_s = 0.0;  ///< awake time while in range
    std::optional<double> latency_s;
    std::optional<double> air_latency_s;
};

struct MetricsReport {
    std::string traffic;
    double bandwidth_bps = 0.0;
    double server_delay_s = 0.0;
    double duration_s = 0.0;
    std::uint64_t seed = 0;
    bool sleep_enabled = true;
    std::string profile;

    std::uint64_t spawned = 0;
    std::uint64_t authenticated = 0;
    std::uint64_t missed = 0;
    std::uint64_t in_progress = 0;
    std::uint64_t eligible = 0;
    std::uint64_t eligible_authenticated = 0;
    std::optional<double> read_ratio;

    Stat latency_s;
    Stat air_latency_s;
    Stat dwell_s;
    Stat awake_fraction;
    double awake_s_mean = 0.0;
    double energy_mj_mean = 0.0;

    anticollision::SlotTotals slots;
    std::uint64_t frames = 0;
    std::uint64_t handshakes = 0;
    std::uint64_t server_rejects = 0;
    std::uint64_t lost_sessions = 0;
    std::uint64_t adversary_accepts = 0;
    double reader_awake_fraction = 0.0;
    std::uint64_t events = 0;
    std::uint64_t trace_digest = 0;
};

struct RunOptions {
    /// One JSON object per processed event.
    std::ostream* trace = nullptr;
    /// Every handshake that reached the server.
    std::vector<protocol::Transcript>* transcripts = nullptr;
    /// Per-tag accounting.
    std::vector<TagOutcome>* tags = nullptr;
};

/// Runs one scenario to completion. Deterministic for a fixed scenario.
[[nodiscard]] MetricsReport run(const Scenario& scenario, const RunOptions& options = {});

/// Airtime of each handshake stage under the scenario's profile.
struct StageTimes {
    double query = 0.0;
    double rn16 = 0.0;
    double turnaround = 0.0;
    double ack = 0.0;
    double auth = 0.0;
    double final = 0.0;

    [[nodiscard]] double slot() const { return rn16 + turnaround; }
    [[nodiscard]] double handshake() const { return query + rn16 + turnaround + ack + auth + final; }
};

[[nodiscard]] StageTimes stage_times(const Scenario& s);

}  // namespace rfidauth::sim
