#include "rfidauth/simcore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

namespace rfidauth::sim {

using protocol::TagAgent;
using protocol::TagPhase;

ConfigError::ConfigError(std::string field, const std::string& what, std::size_t line)
    : std::runtime_error((line ? "line " + std::to_string(line) + ": " : std::string()) + field + ": " + what),
      field_(std::move(field)),
      line_(line) {}

std::string_view to_string(ProtocolProfile p) {
    return p == ProtocolProfile::Hybrid ? "hybrid" : "baseline";
}

std::string_view to_string(EventKind k) {
    switch (k) {
        case EventKind::VehicleEnter:
            return "VehicleEnter";
        case EventKind::VehicleExit:
            return "VehicleExit";
        case EventKind::FrameStart:
            return "FrameStart";
        case EventKind::SlotBoundary:
            return "SlotBoundary";
        case EventKind::MessageDelivery:
            return "MessageDelivery";
        case EventKind::ServerReply:
            return "ServerReply";
        case EventKind::TagWake:
            return "TagWake";
        case EventKind::ReaderScan:
            return "ReaderScan";
        case EventKind::SimEnd:
            return "SimEnd";
    }
    return "?";
}

void Scenario::validate() const {
    auto require = [](bool ok, const char* field, const char* what) {
        if (!ok) {
            throw ConfigError(field, what);
        }
    };
    require(duration_s > 0.0 && std::isfinite(duration_s), "duration", "must be positive");
    require(server_delay_s >= 0.0 && std::isfinite(server_delay_s), "server_delay", "must be non-negative");
    require(reader_scan_period_s > 0.0, "reader_scan_period", "must be positive");
    require(warmup_s >= 0.0, "warmup", "must be non-negative");
    require(initial_q >= 0.0 && initial_q <= anticollision::kMaxQ, "initial_q", "must lie in [0, 15]");
    require(q_step >= 0.1 && q_step <= 0.5, "q_step", "must lie in [0.1, 0.5]");
    require(turnaround_s >= 0.0, "turnaround", "must be non-negative");
    require(idle_slot_fraction > 0.0 && idle_slot_fraction <= 1.0, "idle_slot_fraction", "must lie in (0, 1]");
    require(radio.bandwidth_bps > 0.0, "bandwidth", "must be positive");
    require(radio.coverage_radius_m > 0.0, "coverage_radius", "must be positive");
    require(radio.tag_power_w >= 0.0, "tag_power", "must be non-negative");
    require(!radio.shadowing || radio.shadowing_sigma_db >= 0.0, "shadowing_sigma", "must be non-negative");
    require(approach_distance_m >= radio.coverage_radius_m, "approach_distance",
            "vehicles must spawn outside the coverage area");
    require(sleep_strategy.kind != protocol::SleepStrategy::Kind::Fixed || sleep_strategy.fixed_s >= 0.0,
            "sleep_time", "must be non-negative");
    require(traffic.lanes >= 1, "lanes", "must be at least 1");
    require(traffic.speed_min > 0.0 && traffic.speed_min <= traffic.speed_max, "speed",
            "need 0 < speed_min <= speed_max");
    require(traffic.headway_min >= 0.0 && traffic.headway_min <= traffic.headway_max, "headway",
            "need 0 <= headway_min <= headway_max");
    require(traffic.lane_width > 0.0, "lane_width", "must be positive");
    try {
        protocol.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("protocol", e.what());
    }
    const std::size_t pre_ack = wire::kQueryBits + wire::kRn16Bits;
    require(profile != ProtocolProfile::BaselineTiming || baseline_handshake_bits > pre_ack, "baseline_bits",
            "must exceed the Query and RN16 airtime");
}

std::uint64_t EventQueue::schedule(double time, EventKind kind, std::uint64_t subject, std::uint64_t token) {
    if (!(time >= now_)) {
        throw std::logic_error("event scheduled in the past");
    }
    const std::uint64_t seq = next_seq_++;
    heap_.push(Event{time, seq, kind, subject, token});
    return seq;
}

Event EventQueue::pop() {
    Event e = heap_.top();
    heap_.pop();
    now_ = e.time;
    return e;
}

Stat Stat::of(std::vector<double> values) {
    Stat s;
    s.n = values.size();
    if (values.empty()) {
        return s;
    }
    std::sort(values.begin(), values.end());
    s.min = values.front();
    s.max = values.back();
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    s.mean = sum / static_cast<double>(values.size());
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(values.size())));
    s.p95 = values[std::max<std::size_t>(rank, 1) - 1];
    return s;
}

StageTimes stage_times(const Scenario& s) {
    const double bw = s.radio.bandwidth_bps;
    const auto bits = [&](wire::MessageKind k) { return wire::message_bits(k, s.protocol); };
    StageTimes t;
    t.query = radio::tx_duration(bits(wire::MessageKind::Query), bw);
    t.rn16 = radio::tx_duration(bits(wire::MessageKind::Rn16), bw);
    t.turnaround = s.turnaround_s;
    t.ack = radio::tx_duration(bits(wire::MessageKind::AckChallenge), bw);
    t.auth = radio::tx_duration(bits(wire::MessageKind::AuthRequest), bw);
    t.final = radio::tx_duration(bits(wire::MessageKind::ServerResponse), bw);
    if (s.profile == ProtocolProfile::BaselineTiming) {
        const double post = static_cast<double>(bits(wire::MessageKind::AckChallenge) +
                                                bits(wire::MessageKind::AuthRequest) +
                                                bits(wire::MessageKind::ServerResponse));
        const double target = static_cast<double>(s.baseline_handshake_bits) -
                              static_cast<double>(bits(wire::MessageKind::Query) + bits(wire::MessageKind::Rn16));
        const double scale = target / post;
        t.ack *= scale;
        t.auth *= scale;
        t.final *= scale;
    }
    return t;
}

namespace {

enum Stage : std::uint64_t { StageAck = 0, StageAuth = 1, StageFinal = 2 };

struct SimTag {
    SimTag(traffic::Vehicle v, std::optional<traffic::RangeInterval> r, TagAgent a)
        : vehicle(v), range(r), agent(std::move(a)) {}

    traffic::Vehicle vehicle;
    std::optional<traffic::RangeInterval> range;
    TagAgent agent;
    bool adversary = false;
    bool present = false;
    std::uint32_t auths = 0;
    std::uint64_t wake_token = 0;
    std::optional<double> sleep_since;
    std::vector<std::pair<double, double>> sleeps;
    std::optional<double> latency;
    std::optional<double> air_latency;
};

struct Handshake {
    std::uint32_t tag = 0;
    double slot_start = 0.0;
    protocol::ServerRequest request;
    protocol::Transcript transcript;
};

class Simulation {
public:
    Simulation(const Scenario& s, const RunOptions& opt)
        : s_(s),
          opt_(opt),
          times_(stage_times(s)),
          traffic_rng_(SeededRng::derive(s.seed, "traffic")),
          tag_rng_(SeededRng::derive(s.seed, "tags")),
          reader_rng_(SeededRng::derive(s.seed, "reader")),
          server_rng_(SeededRng::derive(s.seed, "server")),
          radio_rng_(SeededRng::derive(s.seed, "radio")),
          reader_(s.protocol, s.sleep_strategy, s.initial_q, s.q_step) {
        SeededRng key_rng = SeededRng::derive(s.seed, "server-keys");
        server_ = std::make_unique<protocol::AuthServer>(crypto::kem_keygen(key_rng), s.protocol);
    }

    MetricsReport run() {
        populate();
        q_.schedule(0.0, EventKind::FrameStart);
        q_.schedule(s_.duration_s, EventKind::SimEnd);
        while (!q_.empty()) {
            const Event e = q_.pop();
            record(e);
            if (e.kind == EventKind::SimEnd) {
                break;
            }
            dispatch(e);
        }
        return finish();
    }

private:
    void populate() {
        if (s_.empty_road) {
            return;
        }
        const auto vehicles = traffic::spawn_stream(s_.traffic, s_.duration_s, traffic_rng_);
        tags_.reserve(vehicles.size() + s_.adversarial_responders);
        for (const auto& v : vehicles) {
            const protocol::TagId id = protocol::make_tag_id(s_.seed, v.id);
            server_->enroll(id);
            SimTag t{v, traffic::range_interval(v, s_.radio, s_.approach_distance_m),
                     TagAgent({id, server_->public_key()}, s_.protocol)};
            tags_.push_back(std::move(t));
        }
        vehicles_ = tags_.size();
        for (std::uint32_t i = 0; i < vehicles_; ++i) {
            if (const auto& r = tags_[i].range; r && r->enter <= s_.duration_s) {
                q_.schedule(r->enter, EventKind::VehicleEnter, i);
                if (r->exit <= s_.duration_s) {
                    q_.schedule(r->exit, EventKind::VehicleExit, i);
                }
            }
        }
        SeededRng adv_rng = SeededRng::derive(s_.seed, "adversary");
        for (std::size_t a = 0; a < s_.adversarial_responders; ++a) {
            protocol::TagId id{};
            adv_rng.fill(id);
            SimTag t{traffic::Vehicle{}, std::nullopt, TagAgent({id, server_->public_key()}, s_.protocol)};
            t.adversary = true;
            t.present = true;
            tags_.push_back(std::move(t));
            active_.push_back(static_cast<std::uint32_t>(tags_.size() - 1));
        }
    }

    void dispatch(const Event& e) {
        switch (e.kind) {
            case EventKind::VehicleEnter:
                tags_[e.subject].present = true;
                active_.push_back(static_cast<std::uint32_t>(e.subject));
                break;
            case EventKind::VehicleExit: {
                tags_[e.subject].present = false;
                active_.erase(std::find(active_.begin(), active_.end(), static_cast<std::uint32_t>(e.subject)));
                break;
            }
            case EventKind::ReaderScan:
                reader_asleep_ += e.time - *reader_sleep_since_;
                reader_sleep_since_.reset();
                q_.schedule(e.time, EventKind::FrameStart);
                break;
            case EventKind::FrameStart:
                start_frame(e.time);
                break;
            case EventKind::SlotBoundary:
                slot(e.time, static_cast<std::uint32_t>(e.subject));
                break;
            case EventKind::MessageDelivery:
                deliver(e.time, static_cast<Stage>(e.subject));
                break;
            case EventKind::ServerReply:
                server_reply(e.time);
                break;
            case EventKind::TagWake: {
                SimTag& t = tags_[e.subject];
                if (t.wake_token == e.token && t.sleep_since) {
                    t.sleeps.emplace_back(*t.sleep_since, e.time);
                    t.sleep_since.reset();
                    t.agent.wake();
                }
                break;
            }
            case EventKind::SimEnd:
                break;
        }
    }

    bool reachable(const SimTag& t, double when, radio::LinkDirection dir) {
        if (!t.adversary && (!t.range || when < t.range->enter || when > t.range->exit)) {
            return false;
        }
        if (!s_.radio.shadowing) {
            return true;
        }
        const radio::GroundPos pos =
            t.adversary ? radio::GroundPos{} : traffic::position_at(t.vehicle, when, s_.approach_distance_m);
        return radio::link_success(pos, dir, s_.radio, radio_rng_);
    }

    void start_frame(double now) {
        auto& arb = reader_.arbiter();
        arb.begin_frame();
        frame_start_ = now;
        const auto q = static_cast<std::uint8_t>(arb.frame().q);
        const double heard = now + times_.query;
        replies_.clear();
        for (std::uint32_t i : active_) {
            SimTag& t = tags_[i];
            if (!reachable(t, heard, radio::LinkDirection::Downlink)) {
                continue;
            }
            if (auto r = t.agent.on_query(wire::Query{q}, tag_rng_)) {
                replies_.emplace_back(r->slot, i);
            }
        }
        std::sort(replies_.begin(), replies_.end());
        next_reply_ = 0;
        q_.schedule(heard, EventKind::SlotBoundary, 0);
    }

    void slot(double now, std::uint32_t index) {
        std::vector<std::uint32_t> heard;
        const double rn16_end = now + times_.rn16;
        while (next_reply_ < replies_.size() && replies_[next_reply_].first == index) {
            const std::uint32_t i = replies_[next_reply_++].second;
            SimTag& t = tags_[i];
            if (t.agent.phase() == TagPhase::Arbitrating && reachable(t, rn16_end, radio::LinkDirection::Uplink)) {
                heard.push_back(i);
            }
        }
        const auto outcome = reader_.arbiter().record_slot(static_cast<std::uint32_t>(heard.size()));
        switch (outcome.kind) {
            case anticollision::SlotKind::Idle:
                end_slot(now + times_.slot() * s_.idle_slot_fraction);
                return;
            case anticollision::SlotKind::Collision:
                end_slot(now + times_.slot());
                return;
            case anticollision::SlotKind::Success:
                break;
        }
        hs_ = Handshake{};
        hs_->tag = heard.front();
        hs_->slot_start = now;
        const SimTag& t = tags_[hs_->tag];
        hs_->transcript.session = sessions_++;
        hs_->transcript.tag_label = protocol::to_hex(t.agent.identity().id);
        hs_->transcript.q = static_cast<std::uint8_t>(reader_.arbiter().frame().q);
        hs_->transcript.rn16 = t.agent.session().rn16;
        hs_->transcript.cr = reader_.ack(reader_rng_).cr;
        ++report_.handshakes;
        q_.schedule(now + times_.slot() + times_.ack, EventKind::MessageDelivery, StageAck);
    }

    void lose(double resume_at) {
        tags_[hs_->tag].agent.abandon();
        reader_.end_session();
        hs_.reset();
        ++report_.lost_sessions;
        end_slot(resume_at);
    }

    void deliver(double now, Stage stage) {
        SimTag& t = tags_[hs_->tag];
        switch (stage) {
            case StageAck: {
                if (!reachable(t, now, radio::LinkDirection::Downlink)) {
                    lose(now + times_.auth);  // reader waits out the reply window
                    return;
                }
                t.agent.on_ack(wire::AckChallenge{hs_->transcript.cr});
                hs_->transcript.auth = *t.agent.build_auth(tag_rng_);
                q_.schedule(now + times_.auth, EventKind::MessageDelivery, StageAuth);
                return;
            }
            case StageAuth: {
                if (!reachable(t, now, radio::LinkDirection::Uplink)) {
                    lose(now);
                    return;
                }
                protocol::TagObservation obs{now, std::nullopt};
                if (t.range) {
                    obs.range_exit = t.range->exit;
                }
                hs_->request = reader_.forward(hs_->transcript.auth, reader_.estimate_sleep_time(obs));
                hs_->transcript.time_us = hs_->request.time_us;
                q_.schedule(now + 2.0 * s_.server_delay_s, EventKind::ServerReply);
                return;
            }
            case StageFinal: {
                reader_.end_session();
                if (!reachable(t, now, radio::LinkDirection::Downlink)) {
                    capture();
                    lose(now);
                    return;
                }
                auto verdict = t.agent.on_response(*hs_->transcript.response);
                if (!verdict) {
                    hs_->transcript.tag_reject = verdict.error();
                    capture();
                    hs_.reset();
                    end_slot(now);
                    return;
                }
                hs_->transcript.accepted = true;
                capture();
                accept(hs_->tag, now, *verdict);
                hs_.reset();
                end_slot(now);
                return;
            }
        }
    }

    void server_reply(double now) {
        auto resp = server_->authenticate(hs_->request, server_rng_);
        SimTag& t = tags_[hs_->tag];
        if (!resp) {
            ++report_.server_rejects;
            hs_->transcript.server_reject = resp.error();
            capture();
            t.agent.abandon();
            reader_.end_session();
            hs_.reset();
            end_slot(now);
            return;
        }
        if (t.adversary) {
            ++report_.adversary_accepts;
        }
        hs_->transcript.response = *resp;
        q_.schedule(now + times_.final, EventKind::MessageDelivery, StageFinal);
    }

    void accept(std::uint32_t index, double now, const protocol::Accept& a) {
        SimTag& t = tags_[index];
        if (t.auths++ == 0) {
            t.latency = now - frame_start_;
            t.air_latency = times_.query + (now - hs_->slot_start) - 2.0 * s_.server_delay_s;
        }
        if (!s_.sleep_enabled) {
            t.agent.wake();
            return;
        }
        t.sleep_since = now;
        ++t.wake_token;
        q_.schedule(now + a.sleep_for(), EventKind::TagWake, index, t.wake_token);
    }

    void capture() {
        if (opt_.transcripts) {
            opt_.transcripts->push_back(hs_->transcript);
        }
    }

    void end_slot(double now) {
        auto& arb = reader_.arbiter();
        if (!arb.frame_over()) {
            q_.schedule(now, EventKind::SlotBoundary, arb.frame().slot_index);
            return;
        }
        if (arb.q_changed() || arb.frame_had_reply()) {
            q_.schedule(now, EventKind::FrameStart);
            return;
        }
        // Nothing answered: sleep until the next tick of the scan grid.
        const double p = s_.reader_scan_period_s;
        double tick = std::ceil(now / p) * p;
        if (tick <= now) {
            tick += p;
        }
        reader_sleep_since_ = now;
        q_.schedule(tick, EventKind::ReaderScan);
    }

    void record(const Event& e) {
        ++report_.events;
        auto mix = [&](std::uint64_t v) {
            for (int b = 0; b < 8; ++b) {
                digest_ = (digest_ ^ ((v >> (8 * b)) & 0xFF)) * 0x100000001b3ULL;
            }
        };
        mix(std::bit_cast<std::uint64_t>(e.time));
        mix(static_cast<std::uint64_t>(e.kind));
        mix(e.subject);
        if (opt_.trace) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "{\"t\":%.9f,\"seq\":%llu,\"kind\":\"%s\",\"subject\":%llu}\n", e.time,
                          static_cast<unsigned long long>(e.seq), std::string(to_string(e.kind)).c_str(),
                          static_cast<unsigned long long>(e.subject));
            *opt_.trace << buf;
        }
    }

    MetricsReport finish() {
        const double end = s_.duration_s;
        MetricsReport& r = report_;
        r.traffic = s_.empty_road ? "none" : std::string(traffic::to_string(s_.traffic.name));
        r.bandwidth_bps = s_.radio.bandwidth_bps;
        r.server_delay_s = s_.server_delay_s;
        r.duration_s = end;
        r.seed = s_.seed;
        r.sleep_enabled = s_.sleep_enabled;
        r.profile = std::string(to_string(s_.profile));

        if (reader_sleep_since_) {
            reader_asleep_ += end - *reader_sleep_since_;
        }
        r.reader_awake_fraction = 1.0 - reader_asleep_ / end;
        r.slots = reader_.arbiter().totals();
        r.frames = reader_.arbiter().frames_started();

        std::vector<double> latency, air, dwell, awake_frac;
        double awake_sum = 0.0;
        for (std::uint32_t i = 0; i < vehicles_; ++i) {
            SimTag& t = tags_[i];
            if (t.sleep_since) {
                t.sleeps.emplace_back(*t.sleep_since, std::numeric_limits<double>::infinity());
            }
            TagOutcome o;
            o.vehicle = t.vehicle.id;
            o.lane = t.vehicle.lane;
            o.authentications = t.auths;
            o.authenticated = t.auths > 0;
            o.latency_s = t.latency;
            o.air_latency_s = t.air_latency;
            if (t.range) {
                o.enter = t.range->enter;
                o.exit = t.range->exit;
                const double lo = std::min(t.range->enter, end);
                const double hi = std::min(t.range->exit, end);
                double asleep = 0.0;
                for (const auto& [a, b] : t.sleeps) {
                    asleep += std::max(0.0, std::min(b, hi) - std::max(a, lo));
                }
                o.awake_s = (hi - lo) - asleep;
                o.eligible = t.range->enter >= s_.warmup_s && t.range->exit <= end;
            }
            o.in_progress = !o.authenticated && t.range && t.range->exit > end;

            ++r.spawned;
            if (o.authenticated) {
                ++r.authenticated;
            } else if (o.in_progress) {
                ++r.in_progress;
            } else {
                ++r.missed;
            }
            if (t.latency) {
                latency.push_back(*t.latency);
                air.push_back(*t.air_latency);
            }
            if (o.eligible) {
                ++r.eligible;
                r.eligible_authenticated += o.authenticated ? 1 : 0;
                const double d = o.exit - o.enter;
                dwell.push_back(d);
                awake_frac.push_back(o.awake_s / d);
                awake_sum += o.awake_s;
            }
            if (opt_.tags) {
                opt_.tags->push_back(o);
            }
        }
        if (r.eligible > 0) {
            r.read_ratio = static_cast<double>(r.eligible_authenticated) / static_cast<double>(r.eligible);
            r.awake_s_mean = awake_sum / static_cast<double>(r.eligible);
            r.energy_mj_mean = 1e3 * s_.radio.tag_power_w * r.awake_s_mean;
        }
        r.latency_s = Stat::of(std::move(latency));
        r.air_latency_s = Stat::of(std::move(air));
        r.dwell_s = Stat::of(std::move(dwell));
        r.awake_fraction = Stat::of(std::move(awake_frac));
        r.trace_digest = digest_;
        return r;
    }

    const Scenario& s_;
    const RunOptions& opt_;
    StageTimes times_;
    SeededRng traffic_rng_;
    SeededRng tag_rng_;
    SeededRng reader_rng_;
    SeededRng server_rng_;
    SeededRng radio_rng_;
    protocol::ReaderAgent reader_;
    std::unique_ptr<protocol::AuthServer> server_;

    EventQueue q_;
    std::vector<SimTag> tags_;
    std::size_t vehicles_ = 0;
    std::vector<std::uint32_t> active_;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> replies_;  // (slot, tag)
    std::size_t next_reply_ = 0;
    double frame_start_ = 0.0;
    std::optional<Handshake> hs_;
    std::uint64_t sessions_ = 0;
    std::optional<double> reader_sleep_since_;
    double reader_asleep_ = 0.0;
    std::uint64_t digest_ = 0xcbf29ce484222325ULL;
    MetricsReport report_;
};

}  // namespace

MetricsReport run(const Scenario& scenario, const RunOptions& options) {
    scenario.validate();
    Simulation sim(scenario, options);
    return sim.run();
}

}  // namespace rfidauth::sim
