#include "rfidauth/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <map>
#include <sstream>
#include <thread>
#include <tuple>

#include "rfidauth/config.hpp"

namespace rfidauth::metrics {

namespace {

using sim::ConfigError;
using sim::MetricsReport;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string num(std::optional<double> v) { return v ? num(*v) : std::string(); }

std::string stat_cell(const sim::Stat& s, double sim::Stat::*field, double scale = 1.0) {
    return s.n == 0 ? std::string() : num(s.*field * scale);
}

std::string join(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) {
            out += ',';
        }
        out += cells[i];
    }
    out += '\n';
    return out;
}

/// Everything that identifies a grid point except the seed.
auto group_key(const MetricsReport& r) {
    return std::make_tuple(r.traffic, r.profile, r.bandwidth_bps, r.server_delay_s, r.duration_s, r.sleep_enabled);
}

nlohmann::ordered_json stat_json(const sim::Stat& s) {
    nlohmann::ordered_json j;
    j["n"] = s.n;
    if (s.n > 0) {
        j["min"] = s.min;
        j["mean"] = s.mean;
        j["p95"] = s.p95;
        j["max"] = s.max;
    }
    return j;
}

nlohmann::ordered_json report_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["traffic"] = r.traffic;
    j["profile"] = r.profile;
    j["bandwidth_bps"] = r.bandwidth_bps;
    j["server_delay_s"] = r.server_delay_s;
    j["duration_s"] = r.duration_s;
    j["seed"] = r.seed;
    j["sleep"] = r.sleep_enabled;
    j["spawned"] = r.spawned;
    j["authenticated"] = r.authenticated;
    j["missed"] = r.missed;
    j["in_progress"] = r.in_progress;
    j["eligible"] = r.eligible;
    j["eligible_authenticated"] = r.eligible_authenticated;
    j["read_ratio"] = r.read_ratio ? nlohmann::ordered_json(*r.read_ratio) : nlohmann::ordered_json(nullptr);
    j["latency_s"] = stat_json(r.latency_s);
    j["air_latency_s"] = stat_json(r.air_latency_s);
    j["dwell_s"] = stat_json(r.dwell_s);
    j["awake_fraction"] = stat_json(r.awake_fraction);
    j["awake_s_mean"] = r.awake_s_mean;
    j["energy_mj_mean"] = r.energy_mj_mean;
    j["slots"] = {{"idle", r.slots.idle}, {"success", r.slots.success}, {"collision", r.slots.collision}};
    j["frames"] = r.frames;
    j["handshakes"] = r.handshakes;
    j["server_rejects"] = r.server_rejects;
    j["lost_sessions"] = r.lost_sessions;
    j["adversary_accepts"] = r.adversary_accepts;
    j["reader_awake_fraction"] = r.reader_awake_fraction;
    j["events"] = r.events;
    j["trace_digest"] = r.trace_digest;
    return j;
}

nlohmann::ordered_json mean_se_json(const MeanSe& m) {
    return {{"n", m.n}, {"mean", m.mean}, {"se", m.se}};
}

std::string label(const MetricsReport& r) {
    std::ostringstream o;
    o << r.traffic << " " << r.profile << " " << num(r.bandwidth_bps / 1e3) << "kbps delay " << num(r.server_delay_s * 1e3)
      << "ms sleep " << (r.sleep_enabled ? "on" : "off") << " seed " << r.seed;
    return o.str();
}

}  // namespace

std::string_view to_string(Axis a) {
    switch (a) {
        case Axis::ServerDelay:
            return "delay";
        case Axis::Bandwidth:
            return "bandwidth";
        case Axis::TrafficModel:
            return "traffic";
        case Axis::Seed:
            return "seed";
        case Axis::Sleep:
            return "sleep";
        case Axis::Protocol:
            return "protocol";
    }
    return "?";
}

void apply(sim::Scenario& s, Axis axis, std::string_view value) {
    switch (axis) {
        case Axis::ServerDelay:
            s.server_delay_s = config::parse_seconds(value, "delay", "ms");
            return;
        case Axis::Bandwidth:
            config::apply_setting(s, "bandwidth", value);
            return;
        case Axis::TrafficModel:
            config::apply_setting(s, "traffic", value);
            return;
        case Axis::Seed:
            config::apply_setting(s, "seed", value);
            return;
        case Axis::Sleep:
            config::apply_setting(s, "sleep", value);
            return;
        case Axis::Protocol:
            config::apply_setting(s, "protocol", value);
            return;
    }
}

AxisValues parse_axis(std::string_view text) {
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
        throw ConfigError("sweep", "expected axis=v1,v2,...");
    }
    const std::string name(text.substr(0, eq));
    AxisValues av;
    if (name == "delay" || name == "server_delay") {
        av.axis = Axis::ServerDelay;
    } else if (name == "bandwidth") {
        av.axis = Axis::Bandwidth;
    } else if (name == "traffic") {
        av.axis = Axis::TrafficModel;
    } else if (name == "seed") {
        av.axis = Axis::Seed;
    } else if (name == "sleep") {
        av.axis = Axis::Sleep;
    } else if (name == "protocol") {
        av.axis = Axis::Protocol;
    } else {
        throw ConfigError("sweep", "unknown axis '" + name + "'");
    }
    std::string_view rest = text.substr(eq + 1);
    while (true) {
        const auto comma = rest.find(',');
        std::string v(rest.substr(0, comma));
        if (v.empty()) {
            throw ConfigError("sweep", "empty value for axis '" + name + "'");
        }
        sim::Scenario probe;
        apply(probe, av.axis, v);
        probe.validate();
        av.values.push_back(std::move(v));
        if (comma == std::string_view::npos) {
            break;
        }
        rest = rest.substr(comma + 1);
    }
    return av;
}

std::vector<sim::Scenario> expand(const SweepSpec& spec) {
    std::vector<sim::Scenario> out{spec.base};
    for (const auto& axis : spec.axes) {
        if (axis.values.empty()) {
            throw ConfigError(std::string(to_string(axis.axis)), "axis has no values");
        }
        std::vector<sim::Scenario> next;
        next.reserve(out.size() * axis.values.size());
        for (const auto& s : out) {
            for (const auto& v : axis.values) {
                sim::Scenario t = s;
                apply(t, axis.axis, v);
                next.push_back(std::move(t));
            }
        }
        out = std::move(next);
    }
    return out;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, unsigned threads) {
    std::vector<SweepRow> rows;
    for (auto& s : expand(spec)) {
        rows.push_back({std::move(s), std::nullopt, {}});
    }
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(rows.size(), 1)));

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) {
            try {
                rows[i].report = sim::run(rows[i].scenario);
            } catch (const std::exception& e) {
                rows[i].error = e.what();
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
    }
    return rows;
}

std::vector<MetricsReport> completed(std::span<const SweepRow> rows) {
    std::vector<MetricsReport> out;
    for (const auto& r : rows) {
        if (r.report) {
            out.push_back(*r.report);
        }
    }
    return out;
}

std::vector<std::string> csv_columns() {
    return {"traffic",          "profile",
            "bandwidth_bps",    "server_delay_ms",
            "duration_s",       "seed",
            "sleep",            "spawned",
            "authenticated",    "missed",
            "in_progress",      "eligible",
            "eligible_authenticated", "read_ratio",
            "latency_n",        "latency_min_ms",
            "latency_mean_ms",  "latency_p95_ms",
            "latency_max_ms",   "air_latency_mean_ms",
            "air_latency_p95_ms", "dwell_n",
            "dwell_mean_s",     "awake_fraction_mean",
            "awake_fraction_p95", "awake_s_mean",
            "energy_mj_mean",   "slots_idle",
            "slots_success",    "slots_collision",
            "frames",           "handshakes",
            "server_rejects",   "lost_sessions",
            "adversary_accepts", "reader_awake_fraction",
            "events",           "trace_digest"};
}

std::string emit_csv(std::span<const MetricsReport> reports) {
    std::string out = join(csv_columns());
    for (const auto& r : reports) {
        out += join({r.traffic,
                     r.profile,
                     num(r.bandwidth_bps),
                     num(r.server_delay_s * 1e3),
                     num(r.duration_s),
                     std::to_string(r.seed),
                     r.sleep_enabled ? "on" : "off",
                     std::to_string(r.spawned),
                     std::to_string(r.authenticated),
                     std::to_string(r.missed),
                     std::to_string(r.in_progress),
                     std::to_string(r.eligible),
                     std::to_string(r.eligible_authenticated),
                     num(r.read_ratio),
                     std::to_string(r.latency_s.n),
                     stat_cell(r.latency_s, &sim::Stat::min, 1e3),
                     stat_cell(r.latency_s, &sim::Stat::mean, 1e3),
                     stat_cell(r.latency_s, &sim::Stat::p95, 1e3),
                     stat_cell(r.latency_s, &sim::Stat::max, 1e3),
                     stat_cell(r.air_latency_s, &sim::Stat::mean, 1e3),
                     stat_cell(r.air_latency_s, &sim::Stat::p95, 1e3),
                     std::to_string(r.dwell_s.n),
                     stat_cell(r.dwell_s, &sim::Stat::mean),
                     stat_cell(r.awake_fraction, &sim::Stat::mean),
                     stat_cell(r.awake_fraction, &sim::Stat::p95),
                     num(r.awake_s_mean),
                     num(r.energy_mj_mean),
                     std::to_string(r.slots.idle),
                     std::to_string(r.slots.success),
                     std::to_string(r.slots.collision),
                     std::to_string(r.frames),
                     std::to_string(r.handshakes),
                     std::to_string(r.server_rejects),
                     std::to_string(r.lost_sessions),
                     std::to_string(r.adversary_accepts),
                     num(r.reader_awake_fraction),
                     std::to_string(r.events),
                     std::to_string(r.trace_digest)});
    }
    return out;
}

std::string emit_table5_csv(std::span<const MetricsReport> reports) {
    std::string out =
        join({"model", "read_latency_ms", "dwell_s", "awake_fraction", "protocol", "sleep", "server_delay_ms"});
    for (const auto& r : reports) {
        out += join({r.traffic, stat_cell(r.air_latency_s, &sim::Stat::mean, 1e3), stat_cell(r.dwell_s, &sim::Stat::mean),
                     stat_cell(r.awake_fraction, &sim::Stat::mean), r.profile, r.sleep_enabled ? "on" : "off",
                     num(r.server_delay_s * 1e3)});
    }
    return out;
}

SweepSpec table5_spec(const sim::Scenario& base) {
    SweepSpec spec{base, {}};
    spec.base.radio.bandwidth_bps = 1e6;
    spec.axes.push_back({Axis::TrafficModel, {"light", "medium", "heavy"}});
    spec.axes.push_back({Axis::Protocol, {"baseline", "hybrid"}});
    spec.axes.push_back({Axis::ServerDelay, {"0", "25"}});
    return spec;
}

MeanSe mean_se(std::span<const double> values) {
    MeanSe m;
    m.n = values.size();
    if (m.n == 0) {
        return m;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    m.mean = sum / static_cast<double>(m.n);
    if (m.n > 1) {
        double ss = 0.0;
        for (double v : values) {
            ss += (v - m.mean) * (v - m.mean);
        }
        m.se = std::sqrt(ss / static_cast<double>(m.n - 1) / static_cast<double>(m.n));
    }
    return m;
}

std::vector<SeedAggregate> aggregate_seeds(std::span<const MetricsReport> reports) {
    std::vector<SeedAggregate> out;
    std::vector<std::vector<const MetricsReport*>> members;
    for (const auto& r : reports) {
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const SeedAggregate& a) { return group_key(a.first) == group_key(r); });
        if (it == out.end()) {
            out.push_back({r, 0, {}, {}, {}});
            members.emplace_back();
            it = out.end() - 1;
        }
        members[static_cast<std::size_t>(it - out.begin())].push_back(&r);
    }
    for (std::size_t g = 0; g < out.size(); ++g) {
        std::vector<double> ratio, awake, latency;
        for (const auto* r : members[g]) {
            if (r->read_ratio) {
                ratio.push_back(*r->read_ratio);
            }
            if (r->awake_fraction.n > 0) {
                awake.push_back(r->awake_fraction.mean);
            }
            if (r->latency_s.n > 0) {
                latency.push_back(r->latency_s.mean);
            }
        }
        out[g].runs = members[g].size();
        out[g].read_ratio = mean_se(ratio);
        out[g].awake_fraction = mean_se(awake);
        out[g].latency_s = mean_se(latency);
    }
    return out;
}

std::optional<double> energy_saving(const MetricsReport& sleep_on, const MetricsReport& sleep_off) {
    if (sleep_off.awake_s_mean <= 0.0 || sleep_on.eligible == 0) {
        return std::nullopt;
    }
    return 1.0 - sleep_on.awake_s_mean / sleep_off.awake_s_mean;
}

std::vector<adversary::AttackVerdict> attack_suite(std::uint64_t seed, std::size_t attempts) {
    using namespace adversary;
    std::vector<AttackVerdict> out;
    Testbed bed(seed, 8);
    const auto recorded = bed.record(40);
    for (auto mode : {ReplayMode::FullSession, ReplayMode::ResponseToNewTag, ReplayMode::DuplicateDelivery}) {
        out.push_back(replay_attack(bed, recorded, attempts, mode));
    }
    for (auto mode : {ResendMode::LaterFrame, ResendMode::RogueReaderOriginalCr, ResendMode::RevokedId}) {
        out.push_back(resend_attack(bed, recorded, attempts, mode));
    }
    {
        Testbed large(mix64(seed ^ 1), 8, 10000);
        out.push_back(impersonation_attack(large, attempts, ImpersonationMode::FakeTag));
    }
    out.push_back(impersonation_attack(bed, attempts, ImpersonationMode::FakeReaderRandomB));
    out.push_back(impersonation_attack(bed, attempts, ImpersonationMode::FakeReaderOldB, recorded));

    Testbed pair(mix64(seed ^ 2), 2);
    std::vector<Transcript> a, b;
    for (int i = 0; i < 500; ++i) {
        a.push_back(pair.honest_session(0));
        b.push_back(pair.honest_session(1));
    }
    SeededRng rng = SeededRng::derive(seed, "tracking");
    out.push_back(tracking_distinguisher(a, b, rng));
    return out;
}

Summary summarize(std::span<const MetricsReport> reports, std::span<const adversary::AttackVerdict> attacks,
                  bool check) {
    Summary sum;
    std::ostringstream o;
    auto mark = [&](bool ok) {
        sum.passed = sum.passed && ok;
        return ok ? "PASS" : "FAIL";
    };

    for (const auto& r : reports) {
        o << label(r) << "\n";
        o << "  tags " << r.spawned << " (eligible " << r.eligible << ", read " << r.eligible_authenticated
          << ", in progress " << r.in_progress << ")";
        o << "  read_ratio " << (r.read_ratio ? num(*r.read_ratio) : "n/a") << "\n";
        if (r.latency_s.n > 0) {
            o << "  latency ms mean " << num(r.latency_s.mean * 1e3) << " p95 " << num(r.latency_s.p95 * 1e3)
              << "  air " << num(r.air_latency_s.mean * 1e3) << "\n";
        }
        if (r.dwell_s.n > 0) {
            o << "  dwell s " << num(r.dwell_s.mean) << "  awake fraction " << num(r.awake_fraction.mean)
              << "  energy mJ " << num(r.energy_mj_mean) << "\n";
        }
        o << "  slots idle/success/collision " << r.slots.idle << "/" << r.slots.success << "/" << r.slots.collision
          << "  reader awake " << num(r.reader_awake_fraction) << "\n";
        if (check && r.server_delay_s <= 10e-3 + 1e-12 && r.read_ratio) {
            o << "  read_ratio ≥ 0.90: " << mark(*r.read_ratio >= 0.90) << "\n";
        }
    }

    const auto groups = aggregate_seeds(reports);
    for (const auto& g : groups) {
        if (g.runs > 1) {
            o << "over " << g.runs << " seeds (" << g.first.traffic << " " << g.first.profile << " "
              << num(g.first.bandwidth_bps / 1e3) << "kbps delay " << num(g.first.server_delay_s * 1e3)
              << "ms sleep " << (g.first.sleep_enabled ? "on" : "off") << "): read_ratio "
              << num(g.read_ratio.mean) << " ± " << num(g.read_ratio.se) << "  awake fraction "
              << num(g.awake_fraction.mean) << " ± " << num(g.awake_fraction.se) << "\n";
        }
    }

    // Sleep on/off pairs that agree on everything else, including the seed.
    for (const auto& on : reports) {
        if (!on.sleep_enabled) {
            continue;
        }
        for (const auto& off : reports) {
            if (off.sleep_enabled || off.seed != on.seed) {
                continue;
            }
            auto k_on = group_key(on);
            auto k_off = group_key(off);
            std::get<5>(k_off) = true;
            if (k_on != k_off) {
                continue;
            }
            const auto saving = energy_saving(on, off);
            if (!saving) {
                continue;
            }
            o << "energy saving " << on.traffic << " seed " << on.seed << ": " << num(*saving * 100.0)
              << "% (claim 75-80%)";
            if (check) {
                o << ": " << mark(*saving >= 0.70 && *saving <= 0.85);
            }
            o << "\n";
        }
    }

    for (const auto& v : attacks) {
        if (v.attack == adversary::Attack::Tracking) {
            o << "tracking accuracy " << num(v.accuracy.value_or(0.0)) << " (sigma " << num(v.sigma.value_or(0.0))
              << ", distinct " << num(v.distinct_fraction.value_or(0.0)) << ")";
            if (check) {
                o << ": " << mark(!v.linkable.value_or(true));
            }
        } else {
            o << to_string(v.attack) << " " << v.variant << " successes: " << v.successes << "/" << v.attempts;
            if (check) {
                o << ": " << mark(v.successes == 0);
            }
        }
        o << "\n";
    }
    sum.text = o.str();
    return sum;
}

std::string to_json(std::span<const SweepRow> rows, std::span<const adversary::AttackVerdict> attacks) {
    nlohmann::ordered_json j;
    j["runs"] = nlohmann::ordered_json::array();
    j["errors"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].report) {
            j["runs"].push_back(report_json(*rows[i].report));
        } else {
            j["errors"].push_back({{"row", i}, {"error", rows[i].error}});
        }
    }
    const auto reports = completed(rows);
    j["seed_aggregates"] = nlohmann::ordered_json::array();
    for (const auto& g : aggregate_seeds(reports)) {
        if (g.runs < 2) {
            continue;
        }
        nlohmann::ordered_json a;
        a["traffic"] = g.first.traffic;
        a["profile"] = g.first.profile;
        a["bandwidth_bps"] = g.first.bandwidth_bps;
        a["server_delay_s"] = g.first.server_delay_s;
        a["sleep"] = g.first.sleep_enabled;
        a["runs"] = g.runs;
        a["read_ratio"] = mean_se_json(g.read_ratio);
        a["awake_fraction"] = mean_se_json(g.awake_fraction);
        a["latency_s"] = mean_se_json(g.latency_s);
        j["seed_aggregates"].push_back(a);
    }
    j["attacks"] = nlohmann::ordered_json::array();
    for (const auto& v : attacks) {
        j["attacks"].push_back(nlohmann::ordered_json::parse(v.to_json()));
    }
    return j.dump(2) + "\n";
}

}  // namespace rfidauth::metrics
