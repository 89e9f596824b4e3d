#include "rfidauth/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace rfidauth::traffic {

std::string_view to_string(TrafficModelName name) {
    switch (name) {
        case TrafficModelName::Light:
            return "light";
        case TrafficModelName::Medium:
            return "medium";
        case TrafficModelName::Heavy:
            return "heavy";
    }
    return "?";
}

std::optional<TrafficModelName> parse_model_name(std::string_view text) {
    if (text == "light") {
        return TrafficModelName::Light;
    }
    if (text == "medium") {
        return TrafficModelName::Medium;
    }
    if (text == "heavy") {
        return TrafficModelName::Heavy;
    }
    return std::nullopt;
}

TrafficModel TrafficModel::preset(TrafficModelName name) {
    switch (name) {
        case TrafficModelName::Light:
            return {name, 22.0, 42.0, 0.0, 10.0, 5, 3.5};
        case TrafficModelName::Medium:
            return {name, 11.0, 14.0, 0.25, 0.5, 5, 3.5};
        case TrafficModelName::Heavy:
            return {name, 1.5, 1.5, 3.0, 3.0, 6, 3.5};
    }
    throw std::invalid_argument("unknown traffic model");
}

std::vector<double> lane_offsets(std::uint32_t lanes, double lane_width) {
    if (lanes == 0) {
        throw std::invalid_argument("at least one lane required");
    }
    std::vector<double> out(lanes);
    const double centre = (static_cast<double>(lanes) - 1.0) / 2.0;
    for (std::uint32_t i = 0; i < lanes; ++i) {
        out[i] = (static_cast<double>(i) - centre) * lane_width;
    }
    return out;
}

std::vector<Vehicle> spawn_stream(const TrafficModel& model, double duration, SeededRng& rng) {
    if (!(duration > 0.0)) {
        throw std::invalid_argument("duration must be positive");
    }
    const auto offsets = lane_offsets(model.lanes, model.lane_width);
    std::vector<Vehicle> out;
    for (std::uint32_t lane = 0; lane < model.lanes; ++lane) {
        double t = 0.0;
        while (t <= duration) {
            Vehicle v;
            v.lane = lane;
            v.lateral = offsets[lane];
            v.speed = model.speed_min == model.speed_max ? model.speed_min
                                                         : rng.uniform(model.speed_min, model.speed_max);
            v.entry_time = t;
            out.push_back(v);
            const double h = model.headway_min == model.headway_max ? model.headway_min
                                                                     : rng.uniform(model.headway_min, model.headway_max);
            t += std::max(h, kMinHeadway);
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Vehicle& a, const Vehicle& b) {
        return std::tie(a.entry_time, a.lane) < std::tie(b.entry_time, b.lane);
    });
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].id = static_cast<std::uint32_t>(i);
    }
    return out;
}

radio::GroundPos position_at(const Vehicle& v, double t, double approach_distance) {
    return {v.speed * (t - v.entry_time) - approach_distance, v.lateral};
}

std::optional<RangeInterval> range_interval(const Vehicle& v, const radio::RadioParams& radio,
                                            double approach_distance) {
    const double r = radio.coverage_radius_m;
    if (std::abs(v.lateral) > r || !(v.speed > 0.0)) {
        return std::nullopt;
    }
    const double half_chord =
        radio.coverage == radio::CoverageModel::Strip ? r : std::sqrt(r * r - v.lateral * v.lateral);
    return RangeInterval{v.entry_time + (approach_distance - half_chord) / v.speed,
                         v.entry_time + (approach_distance + half_chord) / v.speed};
}

}  // namespace rfidauth::traffic
