#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "rfidauth/simcore.hpp"

namespace rfidauth::sim {
namespace {

using traffic::TrafficModel;
using traffic::TrafficModelName;

Scenario scenario(TrafficModelName model, double bandwidth, double duration, std::uint64_t seed = 42) {
    Scenario s;
    s.traffic = TrafficModel::preset(model);
    s.radio.bandwidth_bps = bandwidth;
    s.duration_s = duration;
    s.seed = seed;
    return s;
}

// A single heavy-model vehicle: one lane, and the run ends before the
// second vehicle (3 s headway) reaches the coverage area.
Scenario lone_heavy(double delay) {
    Scenario s = scenario(TrafficModelName::Heavy, 1e6, 6.0);
    s.traffic.lanes = 1;
    s.server_delay_s = delay;
    s.warmup_s = 0.0;
    return s;
}

std::vector<TagOutcome> outcomes(const Scenario& s, MetricsReport* report = nullptr) {
    std::vector<TagOutcome> tags;
    RunOptions opt;
    opt.tags = &tags;
    MetricsReport r = run(s, opt);
    if (report) {
        *report = r;
    }
    return tags;
}

// --- event queue -----------------------------------------------------------

TEST(EventQueue, PopsInTimeThenSeqOrder) {
    SeededRng rng(5);
    EventQueue q;
    std::vector<std::pair<double, std::uint64_t>> scheduled;
    for (int i = 0; i < 2000; ++i) {
        const double t = static_cast<double>(rng.below(50)) * 0.5;  // plenty of ties
        scheduled.emplace_back(t, q.schedule(t, EventKind::SlotBoundary, static_cast<std::uint64_t>(i)));
    }
    std::sort(scheduled.begin(), scheduled.end());
    for (const auto& [t, seq] : scheduled) {
        const Event e = q.pop();
        EXPECT_EQ(e.time, t);
        EXPECT_EQ(e.seq, seq);
    }
    EXPECT_TRUE(q.empty());
}

TEST(EventQueue, ZeroDelayLandsAfterTheSender) {
    EventQueue q;
    q.schedule(1.0, EventKind::ServerReply);
    const Event sender = q.pop();
    q.schedule(sender.time, EventKind::MessageDelivery);
    q.schedule(sender.time + 0.0, EventKind::MessageDelivery, 1);
    const Event a = q.pop();
    const Event b = q.pop();
    EXPECT_EQ(a.time, 1.0);
    EXPECT_LT(sender.seq, a.seq);
    EXPECT_LT(a.seq, b.seq);
}

TEST(EventQueue, RejectsThePast) {
    EventQueue q;
    q.schedule(2.0, EventKind::TagWake);
    (void)q.pop();
    EXPECT_THROW(q.schedule(1.999, EventKind::TagWake), std::logic_error);
    EXPECT_NO_THROW(q.schedule(2.0, EventKind::TagWake));
}

TEST(Stat, NearestRankPercentile) {
    std::vector<double> v;
    for (int i = 1; i <= 20; ++i) {
        v.push_back(21 - i);
    }
    const Stat s = Stat::of(v);
    EXPECT_EQ(s.n, 20u);
    EXPECT_DOUBLE_EQ(s.min, 1.0);
    EXPECT_DOUBLE_EQ(s.max, 20.0);
    EXPECT_DOUBLE_EQ(s.mean, 10.5);
    EXPECT_DOUBLE_EQ(s.p95, 19.0);
    EXPECT_EQ(Stat::of({}).n, 0u);
}

// --- timing ----------------------------------------------------------------

TEST(StageTimes, HybridHandshakeAtOneMegabit) {
    Scenario s;
    s.radio.bandwidth_bps = 1e6;
    const StageTimes t = stage_times(s);
    EXPECT_NEAR(t.query, 22e-6, 1e-15);
    EXPECT_NEAR(t.ack, 50e-6, 1e-15);
    EXPECT_NEAR(t.auth, 856e-6, 1e-15);
    EXPECT_NEAR(t.final, 384e-6, 1e-15);
    EXPECT_NEAR(t.handshake(), 1.328e-3 + 62.5e-6, 1e-12);
}

TEST(StageTimes, BaselineStretchesToSeventeenHundredBits) {
    Scenario s;
    s.radio.bandwidth_bps = 1e6;
    s.profile = ProtocolProfile::BaselineTiming;
    const StageTimes t = stage_times(s);
    EXPECT_NEAR(t.handshake() - t.turnaround, 1.7e-3, 1e-12);
    EXPECT_NEAR(t.query + t.rn16, 38e-6, 1e-15);
}

// --- run -------------------------------------------------------------------

TEST(Run, EmptyRoadHasNoReadRatio) {
    Scenario s;
    s.empty_road = true;
    s.duration_s = 10.0;
    const MetricsReport r = run(s);
    EXPECT_EQ(r.spawned, 0u);
    EXPECT_EQ(r.eligible, 0u);
    EXPECT_FALSE(r.read_ratio.has_value());
    EXPECT_EQ(r.latency_s.n, 0u);
    EXPECT_EQ(r.slots.success, 0u);
}

TEST(Run, EmptyRoadReaderDutyCycle) {
    Scenario s;
    s.empty_road = true;
    s.duration_s = 600.0;  // long enough to hide the Q = 4 start-up frames
    const StageTimes t = stage_times(s);
    const double frame = t.query + s.idle_slot_fraction * t.slot();
    const MetricsReport r = run(s);
    EXPECT_NEAR(r.reader_awake_fraction, frame / s.reader_scan_period_s, 0.01 * frame / s.reader_scan_period_s);
}

TEST(Run, FiveMillisecondFrameEveryHundredIsFivePercent) {
    Scenario s;
    s.empty_road = true;
    s.duration_s = 60.0;
    const StageTimes base = stage_times(s);
    // Stretch the turnaround so an empty one-slot frame lasts 5 ms.
    s.turnaround_s = 2.0 * (5e-3 - base.query) - base.rn16;
    const StageTimes t = stage_times(s);
    ASSERT_NEAR(t.query + 0.5 * t.slot(), 5e-3, 1e-12);
    EXPECT_NEAR(run(s).reader_awake_fraction, 0.05, 0.001);
}

TEST(Run, SaturatedRoadKeepsReaderAwake) {
    Scenario s = scenario(TrafficModelName::Medium, 128e3, 20.0);
    s.sleep_enabled = false;
    EXPECT_GT(run(s).reader_awake_fraction, 0.98);
}

TEST(Run, LoneTagLatencyIsHandshakePlusRoundTrip) {
    const Scenario s0 = lone_heavy(0.0);
    const Scenario s10 = lone_heavy(10e-3);
    MetricsReport r0, r10;
    const auto t0 = outcomes(s0, &r0);
    const auto t10 = outcomes(s10, &r10);
    ASSERT_EQ(r0.authenticated, 1u);
    ASSERT_EQ(r10.authenticated, 1u);
    const TagOutcome& a = t0.front();
    const TagOutcome& b = t10.front();
    const StageTimes st = stage_times(s0);
    EXPECT_NEAR(*a.air_latency_s, st.handshake(), 1e-9);
    EXPECT_NEAR(*b.air_latency_s, st.handshake(), 1e-9);
    EXPECT_GE(*a.air_latency_s, 1.0e-3);
    EXPECT_LE(*a.air_latency_s, 1.6e-3);
    // Everything but the server round trip is identical.
    EXPECT_NEAR(*b.latency_s - *a.latency_s, 20e-3, 1e-9);
    // Any excess over the air time is slot waiting inside the frame.
    const double wait = *a.latency_s - *a.air_latency_s;
    EXPECT_GE(wait, -1e-12);
    EXPECT_LT(wait, 16 * st.slot());
}

TEST(Run, SameSeedSameReport) {
    const Scenario s = scenario(TrafficModelName::Medium, 256e3, 20.0, 7);
    std::ostringstream trace_a, trace_b;
    RunOptions a, b;
    a.trace = &trace_a;
    b.trace = &trace_b;
    const MetricsReport ra = run(s, a);
    const MetricsReport rb = run(s, b);
    EXPECT_EQ(trace_a.str(), trace_b.str());
    EXPECT_EQ(ra.trace_digest, rb.trace_digest);
    EXPECT_EQ(ra.events, rb.events);
    EXPECT_EQ(ra.authenticated, rb.authenticated);
    EXPECT_EQ(ra.latency_s.mean, rb.latency_s.mean);
    EXPECT_EQ(ra.awake_fraction.mean, rb.awake_fraction.mean);

    Scenario other = s;
    other.seed = 8;
    EXPECT_NE(run(other).trace_digest, ra.trace_digest);
}

TEST(Run, TraceLinesAreOrdered) {
    const Scenario s = scenario(TrafficModelName::Light, 256e3, 10.0, 3);
    std::ostringstream trace;
    RunOptions opt;
    opt.trace = &trace;
    const MetricsReport r = run(s, opt);
    std::istringstream in(trace.str());
    std::string line;
    double last = -1.0;
    std::uint64_t lines = 0;
    while (std::getline(in, line)) {
        const double t = std::stod(line.substr(line.find(':') + 1));
        EXPECT_GE(t, last);
        last = t;
        ++lines;
    }
    EXPECT_EQ(lines, r.events);
}

TEST(Run, ConservationAcrossRandomScenarios) {
    SeededRng gen(2024);
    const TrafficModelName models[] = {TrafficModelName::Light, TrafficModelName::Medium, TrafficModelName::Heavy};
    const double bandwidths[] = {128e3, 256e3, 1e6};
    for (int i = 0; i < 30; ++i) {
        Scenario s = scenario(models[gen.below(3)], bandwidths[gen.below(3)], gen.uniform(2.0, 25.0), gen.next_u64());
        s.server_delay_s = gen.uniform(0.0, 25e-3);
        s.sleep_enabled = gen.below(4) != 0;
        s.warmup_s = gen.uniform(0.0, 5.0);
        std::vector<TagOutcome> tags;
        MetricsReport r;
        tags = outcomes(s, &r);
        SCOPED_TRACE(i);
        EXPECT_EQ(r.authenticated + r.missed + r.in_progress, r.spawned);
        EXPECT_EQ(tags.size(), r.spawned);
        EXPECT_LE(r.eligible_authenticated, r.eligible);
        for (const auto& t : tags) {
            EXPECT_GE(t.awake_s, -1e-9);
            EXPECT_LE(t.awake_s, std::max(0.0, std::min(t.exit, s.duration_s) - std::min(t.enter, s.duration_s)) + 1e-9);
            EXPECT_FALSE(t.authenticated && t.in_progress);
        }
    }
}

TEST(Run, GeometrySleepMeansOneReadPerPassage) {
    Scenario s = scenario(TrafficModelName::Heavy, 1e6, 60.0);
    for (const auto& t : outcomes(s)) {
        EXPECT_LE(t.authentications, 1u);
    }
}

TEST(Run, ZeroSleepTimeReArbitrates) {
    Scenario s = lone_heavy(0.0);
    s.sleep_strategy.kind = protocol::SleepStrategy::Kind::Fixed;
    s.sleep_strategy.fixed_s = 0.0;
    const auto tags = outcomes(s);
    EXPECT_GT(tags.front().authentications, 10u);
}

TEST(Run, SleepDisabledKeepsTagsAwake) {
    Scenario s = lone_heavy(0.0);
    s.sleep_enabled = false;
    const auto tags = outcomes(s);
    const TagOutcome& t = tags.front();
    EXPECT_GT(t.authentications, 10u);
    EXPECT_NEAR(t.awake_s, std::min(t.exit, s.duration_s) - t.enter, 1e-9);
}

TEST(Run, SleepNeverCostsEnergy) {
    for (auto model : {TrafficModelName::Light, TrafficModelName::Medium, TrafficModelName::Heavy}) {
        // Heavy traffic needs 17 s before the first passage completes.
        Scenario on = scenario(model, 1e6, model == TrafficModelName::Heavy ? 20.0 : 10.0, 11);
        on.warmup_s = 0.0;
        Scenario off = on;
        off.sleep_enabled = false;
        MetricsReport r_on, r_off;
        const auto a = outcomes(on, &r_on);
        const auto b = outcomes(off, &r_off);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_EQ(a[i].vehicle, b[i].vehicle);
            EXPECT_LE(a[i].awake_s, b[i].awake_s + 1e-9);
        }
        EXPECT_NEAR(r_on.energy_mj_mean, 40.0 * r_on.awake_s_mean, 1e-9);
        EXPECT_LT(r_on.energy_mj_mean, r_off.energy_mj_mean);
    }
}

TEST(Run, ExitBeforeResponseIsMissed) {
    Scenario s = scenario(TrafficModelName::Light, 1e6, 30.0);
    s.server_delay_s = 1.0;  // 2 s round trip; light-traffic dwell is under 1 s
    s.warmup_s = 0.0;
    const MetricsReport r = run(s);
    EXPECT_EQ(r.authenticated, 0u);
    EXPECT_GT(r.missed, 0u);
    EXPECT_GT(r.lost_sessions, 0u);
    ASSERT_TRUE(r.read_ratio.has_value());
    EXPECT_EQ(*r.read_ratio, 0.0);
}

TEST(Run, ReadRatioFallsWithDelay) {
    const double delays[] = {0.0, 5e-3, 10e-3, 15e-3, 20e-3, 25e-3};
    std::vector<double> ratio;
    for (double d : delays) {
        double sum = 0.0;
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            Scenario s = scenario(TrafficModelName::Medium, 128e3, 30.0, seed);
            s.server_delay_s = d;
            sum += run(s).read_ratio.value();
        }
        ratio.push_back(sum / 3.0);
    }
    for (std::size_t i = 1; i < ratio.size(); ++i) {
        EXPECT_LE(ratio[i], ratio[i - 1] + 0.01) << "delay index " << i;
    }
}

TEST(Run, HeavyDwellMatchesGeometry) {
    const MetricsReport r = run(scenario(TrafficModelName::Heavy, 1e6, 60.0));
    EXPECT_NEAR(r.dwell_s.mean, 20.0 / 1.5, 1e-9);
}

TEST(Run, FakeRespondersNeverAuthenticate) {
    Scenario s = scenario(TrafficModelName::Medium, 256e3, 8.0);
    s.adversarial_responders = 5;
    std::vector<protocol::Transcript> transcripts;
    RunOptions opt;
    opt.transcripts = &transcripts;
    const MetricsReport r = run(s, opt);
    EXPECT_EQ(r.adversary_accepts, 0u);
    EXPECT_GT(r.server_rejects, 0u);
    std::uint64_t unknown = 0;
    for (const auto& t : transcripts) {
        if (t.server_reject == protocol::RejectReason::UnknownId) {
            ++unknown;
            EXPECT_FALSE(t.accepted);
        }
    }
    EXPECT_EQ(unknown, r.server_rejects);
}

TEST(Run, TranscriptsCoverEveryServerVisit) {
    const Scenario s = scenario(TrafficModelName::Light, 256e3, 30.0);
    std::vector<protocol::Transcript> transcripts;
    RunOptions opt;
    opt.transcripts = &transcripts;
    const MetricsReport r = run(s, opt);
    std::uint64_t accepted = 0;
    for (const auto& t : transcripts) {
        accepted += t.accepted ? 1 : 0;
        EXPECT_EQ(protocol::transcript_from_jsonl(protocol::to_jsonl(t)).auth.r1.blocks, t.auth.r1.blocks);
    }
    EXPECT_EQ(accepted, r.authenticated);
    EXPECT_LE(transcripts.size(), r.handshakes);
}

TEST(Run, BaselineProfileIsSlower) {
    Scenario s = lone_heavy(0.0);
    s.profile = ProtocolProfile::BaselineTiming;
    const auto tags = outcomes(s);
    EXPECT_NEAR(*tags.front().air_latency_s, 1.7e-3 + s.turnaround_s, 1e-9);
}

TEST(Run, ConfigErrorsNameTheField) {
    const std::map<std::string, std::function<void(Scenario&)>> broken = {
        {"server_delay", [](Scenario& s) { s.server_delay_s = -1e-3; }},
        {"bandwidth", [](Scenario& s) { s.radio.bandwidth_bps = 0.0; }},
        {"duration", [](Scenario& s) { s.duration_s = 0.0; }},
        {"approach_distance", [](Scenario& s) { s.approach_distance_m = 5.0; }},
        {"q_step", [](Scenario& s) { s.q_step = 0.9; }},
        {"reader_scan_period", [](Scenario& s) { s.reader_scan_period_s = 0.0; }},
    };
    for (const auto& [field, breakit] : broken) {
        Scenario s;
        breakit(s);
        try {
            (void)run(s);
            ADD_FAILURE() << field << " accepted";
        } catch (const ConfigError& e) {
            EXPECT_EQ(e.field(), field);
        }
    }
}

}  // namespace
}  // namespace rfidauth::sim
