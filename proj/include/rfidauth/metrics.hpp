#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rfidauth/adversary.hpp"
#include "rfidauth/simcore.hpp"

namespace rfidauth::metrics {

enum class Axis { ServerDelay, Bandwidth, TrafficModel, Seed, Sleep, Protocol };

[[nodiscard]] std::string_view to_string(Axis a);

struct AxisValues {
    Axis axis = Axis::ServerDelay;
    std::vector<std::string> values;
};

/// Grid of scenarios: the cross product of all axes applied to `base`.
/// The first axis varies slowest.
struct SweepSpec {
    sim::Scenario base;
    std::vector<AxisValues> axes;
};

/// Parses `axis=v1,v2,...`. Delays default to milliseconds. Every value is
/// checked against the default scenario; throws ConfigError.
[[nodiscard]] AxisValues parse_axis(std::string_view text);

/// Applies one axis value. A traffic value resets all traffic parameters to
/// that preset.
void apply(sim::Scenario& s, Axis axis, std::string_view value);

/// Scenarios of the grid in row order.
[[nodiscard]] std::vector<sim::Scenario> expand(const SweepSpec& spec);

struct SweepRow {
    sim::Scenario scenario;
    std::optional<sim::MetricsReport> report;
    std::string error;  ///< set when the run threw
};

/// Runs every grid point; `threads` = 0 picks the hardware concurrency.
/// Rows come back in grid order whatever the thread count.
[[nodiscard]] std::vector<SweepRow> run_sweep(const SweepSpec& spec, unsigned threads = 1);

/// Reports of the rows that completed.
[[nodiscard]] std::vector<sim::MetricsReport> completed(std::span<const SweepRow> rows);

/// Fixed column order, `%.6g` numbers, empty cells for missing values.
[[nodiscard]] std::vector<std::string> csv_columns();
[[nodiscard]] std::string emit_csv(std::span<const sim::MetricsReport> reports);

/// model, read latency, dwell and awake fraction, one row per report. The
/// protocol, sleep and delay columns tell the rows of a grid apart.
[[nodiscard]] std::string emit_table5_csv(std::span<const sim::MetricsReport> reports);

/// Scenario grid behind the awake-time table: three traffic models, both
/// protocol profiles and server delays of 0 and 25 ms at 1 Mbps.
[[nodiscard]] SweepSpec table5_spec(const sim::Scenario& base);

struct MeanSe {
    std::size_t n = 0;
    double mean = 0.0;
    double se = 0.0;  ///< standard error of the mean; 0 for n < 2
};

[[nodiscard]] MeanSe mean_se(std::span<const double> values);

/// Reports that differ only in seed, folded together.
struct SeedAggregate {
    sim::MetricsReport first;  ///< identifies the group
    std::size_t runs = 0;
    MeanSe read_ratio;
    MeanSe awake_fraction;
    MeanSe latency_s;
};

/// Groups keep the order of their first member.
[[nodiscard]] std::vector<SeedAggregate> aggregate_seeds(std::span<const sim::MetricsReport> reports);

/// Energy use is proportional to awake time; the saving compares mean awake
/// time per eligible tag.
[[nodiscard]] std::optional<double> energy_saving(const sim::MetricsReport& sleep_on,
                                                  const sim::MetricsReport& sleep_off);

/// Attack harnesses run at their standard size.
[[nodiscard]] std::vector<adversary::AttackVerdict> attack_suite(std::uint64_t seed, std::size_t attempts = 1000);

struct Summary {
    std::string text;
    bool passed = true;  ///< false when any check failed
};

/// One-screen text. With `check`, threshold lines are added and `passed`
/// reflects them.
[[nodiscard]] Summary summarize(std::span<const sim::MetricsReport> reports,
                                std::span<const adversary::AttackVerdict> attacks, bool check);

[[nodiscard]] std::string to_json(std::span<const SweepRow> rows, std::span<const adversary::AttackVerdict> attacks);

}  // namespace rfidauth::metrics
