#include "rfidauth/config.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

namespace rfidauth::config {

namespace {

using Units = std::vector<std::pair<std::string_view, double>>;

const Units kTimeUnits = {{"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}};
const Units kRateUnits = {{"bps", 1.0}, {"kbps", 1e3}, {"k", 1e3}, {"mbps", 1e6}, {"m", 1e6}};
const Units kLengthUnits = {{"m", 1.0}};
const Units kPowerUnits = {{"w", 1.0}, {"mw", 1e-3}};
const Units kDbmUnits = {{"dbm", 1.0}};
const Units kDbUnits = {{"db", 1.0}};
const Units kFrequencyUnits = {{"hz", 1.0}, {"khz", 1e3}, {"mhz", 1e6}, {"ghz", 1e9}};
const Units kSpeedUnits = {{"m/s", 1.0}};
const Units kNone = {};

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

[[noreturn]] void bad(std::string_view field, const std::string& what) { throw ConfigError(std::string(field), what); }

/// Number with an optional unit from `units`; a bare number is taken in
/// `default_unit`.
double quantity(std::string_view text, std::string_view field, const Units& units, std::string_view default_unit) {
    const std::string s = lower(trim(text));
    double value = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr == begin) {
        bad(field, "expected a number, got '" + std::string(text) + "'");
    }
    if (!std::isfinite(value)) {
        bad(field, "value must be finite");
    }
    const std::string_view unit = trim(std::string_view(ptr, static_cast<std::size_t>(end - ptr)));
    const std::string_view want = unit.empty() ? default_unit : unit;
    if (want.empty()) {
        if (!unit.empty()) {
            bad(field, "takes no unit");
        }
        return value;
    }
    for (const auto& [name, scale] : units) {
        if (name == want) {
            return value * scale;
        }
    }
    bad(field, "unknown unit '" + std::string(unit) + "'");
}

std::uint64_t integer(std::string_view text, std::string_view field) {
    const std::string_view s = trim(text);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        bad(field, "expected a non-negative integer, got '" + std::string(text) + "'");
    }
    return v;
}

struct Setter {
    int order = 1;  // traffic presets are applied before individual overrides
    std::function<void(sim::Scenario&, std::string_view)> apply;
};

std::map<std::string, Setter, std::less<>> setters() {
    std::map<std::string, Setter, std::less<>> m;
    auto num = [&m](const char* key, const Units& units, std::string_view def, auto member) {
        m[key] = {1, [=](sim::Scenario& s, std::string_view v) { member(s) = quantity(v, key, units, def); }};
    };
    m["traffic"] = {0, [](sim::Scenario& s, std::string_view v) {
                        const std::string name = lower(trim(v));
                        if (name == "none") {
                            s.empty_road = true;
                            return;
                        }
                        const auto model = traffic::parse_model_name(name);
                        if (!model) {
                            bad("traffic", "expected light, medium, heavy or none");
                        }
                        s.empty_road = false;
                        s.traffic = traffic::TrafficModel::preset(*model);
                    }};
    m["lanes"] = {1, [](sim::Scenario& s, std::string_view v) {
                      s.traffic.lanes = static_cast<std::uint32_t>(integer(v, "lanes"));
                  }};
    num("speed_min", kSpeedUnits, "m/s", [](sim::Scenario& s) -> double& { return s.traffic.speed_min; });
    num("speed_max", kSpeedUnits, "m/s", [](sim::Scenario& s) -> double& { return s.traffic.speed_max; });
    num("headway_min", kTimeUnits, "s", [](sim::Scenario& s) -> double& { return s.traffic.headway_min; });
    num("headway_max", kTimeUnits, "s", [](sim::Scenario& s) -> double& { return s.traffic.headway_max; });
    num("lane_width", kLengthUnits, "m", [](sim::Scenario& s) -> double& { return s.traffic.lane_width; });

    m["bandwidth"] = {1, [](sim::Scenario& s, std::string_view v) {
                          s.radio.bandwidth_bps = parse_bandwidth(v, "bandwidth");
                      }};
    num("server_delay", kTimeUnits, "s", [](sim::Scenario& s) -> double& { return s.server_delay_s; });
    num("duration", kTimeUnits, "s", [](sim::Scenario& s) -> double& { return s.duration_s; });
    m["seed"] = {1, [](sim::Scenario& s, std::string_view v) { s.seed = integer(v, "seed"); }};
    m["sleep"] = {1, [](sim::Scenario& s, std::string_view v) { s.sleep_enabled = parse_bool(v, "sleep"); }};
    m["sleep_strategy"] = {1, [](sim::Scenario& s, std::string_view v) {
                               const std::string k = lower(trim(v));
                               if (k == "geometry") {
                                   s.sleep_strategy.kind = protocol::SleepStrategy::Kind::Geometry;
                               } else if (k == "fixed") {
                                   s.sleep_strategy.kind = protocol::SleepStrategy::Kind::Fixed;
                               } else {
                                   bad("sleep_strategy", "expected geometry or fixed");
                               }
                           }};
    num("sleep_time", kTimeUnits, "s", [](sim::Scenario& s) -> double& { return s.sleep_strategy.fixed_s; });
    num("reader_scan_period", kTimeUnits, "s", [](sim::Scenario& s) -> double& { return s.reader_scan_period_s; });
    m["protocol"] = {1, [](sim::Scenario& s, std::string_view v) {
                         const std::string k = lower(trim(v));
                         if (k == "hybrid") {
                             s.profile = sim::ProtocolProfile::Hybrid;
                         } else if (k == "baseline") {
                             s.profile = sim::ProtocolProfile::BaselineTiming;
                         } else {
                             bad("protocol", "expected hybrid or baseline");
                         }
                     }};
    m["baseline_bits"] = {1, [](sim::Scenario& s, std::string_view v) {
                              s.baseline_handshake_bits = integer(v, "baseline_bits");
                          }};
    num("warmup", kTimeUnits, "s", [](sim::Scenario& s) -> double& { return s.warmup_s; });
    num("approach_distance", kLengthUnits, "m", [](sim::Scenario& s) -> double& { return s.approach_distance_m; });
    num("initial_q", kNone, "", [](sim::Scenario& s) -> double& { return s.initial_q; });
    num("q_step", kNone, "", [](sim::Scenario& s) -> double& { return s.q_step; });
    num("turnaround", kTimeUnits, "s", [](sim::Scenario& s) -> double& { return s.turnaround_s; });
    num("idle_slot_fraction", kNone, "", [](sim::Scenario& s) -> double& { return s.idle_slot_fraction; });
    m["adversarial_responders"] = {1, [](sim::Scenario& s, std::string_view v) {
                                       s.adversarial_responders = integer(v, "adversarial_responders");
                                   }};
    m["cr_bytes"] = {1, [](sim::Scenario& s, std::string_view v) { s.protocol.cr_bytes = integer(v, "cr_bytes"); }};
    m["ct_bytes"] = {1, [](sim::Scenario& s, std::string_view v) { s.protocol.ct_bytes = integer(v, "ct_bytes"); }};
    m["time_bytes"] = {1, [](sim::Scenario& s, std::string_view v) {
                           s.protocol.time_bytes = integer(v, "time_bytes");
                       }};

    m["coverage"] = {1, [](sim::Scenario& s, std::string_view v) {
                         const std::string k = lower(trim(v));
                         if (k == "strip") {
                             s.radio.coverage = radio::CoverageModel::Strip;
                         } else if (k == "disc") {
                             s.radio.coverage = radio::CoverageModel::Disc;
                         } else {
                             bad("coverage", "expected strip or disc");
                         }
                     }};
    num("coverage_radius", kLengthUnits, "m", [](sim::Scenario& s) -> double& { return s.radio.coverage_radius_m; });
    m["shadowing"] = {1, [](sim::Scenario& s, std::string_view v) { s.radio.shadowing = parse_bool(v, "shadowing"); }};
    num("shadowing_sigma", kDbUnits, "db", [](sim::Scenario& s) -> double& { return s.radio.shadowing_sigma_db; });
    num("path_loss_exponent", kNone, "", [](sim::Scenario& s) -> double& { return s.radio.path_loss_exponent; });
    num("tag_power", kPowerUnits, "w", [](sim::Scenario& s) -> double& { return s.radio.tag_power_w; });
    num("reader_power", kPowerUnits, "w", [](sim::Scenario& s) -> double& { return s.radio.reader_power_w; });
    num("tag_tx", kDbmUnits, "dbm", [](sim::Scenario& s) -> double& { return s.radio.tag_tx_dbm; });
    num("reader_tx", kDbmUnits, "dbm", [](sim::Scenario& s) -> double& { return s.radio.reader_tx_dbm; });
    num("tag_sensitivity", kDbmUnits, "dbm", [](sim::Scenario& s) -> double& { return s.radio.tag_sensitivity_dbm; });
    num("reader_sensitivity", kDbmUnits, "dbm",
        [](sim::Scenario& s) -> double& { return s.radio.reader_sensitivity_dbm; });
    num("tag_antenna_height", kLengthUnits, "m",
        [](sim::Scenario& s) -> double& { return s.radio.tag_antenna_height_m; });
    num("reader_antenna_height", kLengthUnits, "m",
        [](sim::Scenario& s) -> double& { return s.radio.reader_antenna_height_m; });
    num("frequency", kFrequencyUnits, "hz", [](sim::Scenario& s) -> double& { return s.radio.frequency_hz; });
    return m;
}

const std::map<std::string, Setter, std::less<>>& table() {
    static const auto t = setters();
    return t;
}

}  // namespace

double parse_seconds(std::string_view text, std::string_view field, std::string_view default_unit) {
    return quantity(text, field, kTimeUnits, default_unit);
}

double parse_bandwidth(std::string_view text, std::string_view field) {
    return quantity(text, field, kRateUnits, "bps");
}

bool parse_bool(std::string_view text, std::string_view field) {
    const std::string v = lower(trim(text));
    if (v == "true" || v == "on" || v == "yes" || v == "1") {
        return true;
    }
    if (v == "false" || v == "off" || v == "no" || v == "0") {
        return false;
    }
    bad(field, "expected a boolean, got '" + std::string(text) + "'");
}

void apply_setting(sim::Scenario& s, std::string_view key, std::string_view value) {
    const auto it = table().find(lower(trim(key)));
    if (it == table().end()) {
        bad(key, "unknown key");
    }
    it->second.apply(s, value);
}

sim::Scenario parse_config(std::string_view text) {
    const auto& table = config::table();
    struct Assignment {
        std::string key;
        std::string value;
        std::size_t line;
        const Setter* setter;
    };
    std::vector<Assignment> assignments;
    std::map<std::string, std::size_t> seen;

    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(std::string(line), "expected 'key = value'", line_no);
        }
        const std::string key = lower(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        const auto it = table.find(key);
        if (it == table.end()) {
            throw ConfigError(key, "unknown key", line_no);
        }
        if (value.empty()) {
            throw ConfigError(key, "missing value", line_no);
        }
        if (const auto prev = seen.find(key); prev != seen.end()) {
            throw ConfigError(key, "already set on line " + std::to_string(prev->second), line_no);
        }
        seen[key] = line_no;
        assignments.push_back({key, std::string(value), line_no, &it->second});
    }
    std::stable_sort(assignments.begin(), assignments.end(),
                     [](const Assignment& a, const Assignment& b) { return a.setter->order < b.setter->order; });

    sim::Scenario s;
    for (const auto& a : assignments) {
        try {
            a.setter->apply(s, a.value);
        } catch (const ConfigError& e) {
            const std::string what = e.what();
            throw ConfigError(a.key, what.substr(what.find(": ") + 2), a.line);
        }
    }
    try {
        s.validate();
    } catch (const ConfigError& e) {
        // Point at the line that set the offending field, if any.
        const auto it = seen.find(e.field());
        if (it != seen.end()) {
            const std::string what = e.what();
            throw ConfigError(e.field(), what.substr(what.find(": ") + 2), it->second);
        }
        throw;
    }
    return s;
}

sim::Scenario load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw ConfigError("config", "cannot open '" + path + "'");
    }
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config(buf.str());
}

}  // namespace rfidauth::config
