#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "rfidauth/radio.hpp"
#include "rfidauth/rng.hpp"

namespace rfidauth::traffic {

enum class TrafficModelName { Light, Medium, Heavy };

[[nodiscard]] std::string_view to_string(TrafficModelName name);
[[nodiscard]] std::optional<TrafficModelName> parse_model_name(std::string_view text);

/// Headways shorter than this are clamped so two vehicles never spawn at the
/// same instant in one lane.
inline constexpr double kMinHeadway = 0.1;

struct TrafficModel {
    TrafficModelName name = TrafficModelName::Medium;
    double speed_min = 11.0;  ///< m/s
    double speed_max = 14.0;
    double headway_min = 0.25;  ///< s
    double headway_max = 0.5;
    std::uint32_t lanes = 5;
    double lane_width = 3.5;  ///< m

    /// Light 22-42 m/s, 0-10 s, 5 lanes; Medium 11-14 m/s, 0.25-0.5 s, 5 lanes;
    /// Heavy 1.5 m/s, 3 s, 6 lanes.
    static TrafficModel preset(TrafficModelName name);
};

struct Vehicle {
    std::uint32_t id = 0;
    std::uint32_t lane = 0;
    double lateral = 0.0;     ///< lane offset from the road centre, m
    double speed = 0.0;       ///< constant, m/s
    double entry_time = 0.0;  ///< time at the approach start, s
};

/// Lane centres placed symmetrically about the reader's ground point.
[[nodiscard]] std::vector<double> lane_offsets(std::uint32_t lanes, double lane_width);

/// Per-lane arrival streams over [0, duration]; each lane's first vehicle
/// arrives at t = 0. Vehicles are ordered by (entry_time, lane) and numbered.
[[nodiscard]] std::vector<Vehicle> spawn_stream(const TrafficModel& model, double duration, SeededRng& rng);

/// Linear kinematics: the vehicle starts `approach_distance` metres before the
/// reader and moves in +x.
[[nodiscard]] radio::GroundPos position_at(const Vehicle& v, double t, double approach_distance);

struct RangeInterval {
    double enter = 0.0;
    double exit = 0.0;
    [[nodiscard]] double dwell() const { return exit - enter; }
};

/// Time interval the vehicle spends inside the coverage zone; nullopt if its
/// lane never intersects it.
[[nodiscard]] std::optional<RangeInterval> range_interval(const Vehicle& v, const radio::RadioParams& radio,
                                                          double approach_distance);

}  // namespace rfidauth::traffic
