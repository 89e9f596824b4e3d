#pragma once

#include <string>
#include <string_view>

#include "rfidauth/simcore.hpp"

namespace rfidauth::config {

using sim::ConfigError;

/// Parses a `key = value` document (one assignment per line, `#` starts a
/// comment). Omitted keys keep their defaults; unknown or repeated keys are
/// errors. Quantities take an optional unit suffix, e.g. `10ms`, `256kbps`,
/// `40mW`. Throws ConfigError carrying the line and key.
[[nodiscard]] sim::Scenario parse_config(std::string_view text);

/// Reads and parses a file; I/O failures are reported as ConfigError.
[[nodiscard]] sim::Scenario load_config(const std::string& path);

/// Sets one config key on `s` without validating the result. Throws
/// ConfigError for unknown keys or malformed values.
void apply_setting(sim::Scenario& s, std::string_view key, std::string_view value);

/// Quantity parsers shared with the sweep syntax. `field` only labels errors.
[[nodiscard]] double parse_seconds(std::string_view text, std::string_view field, std::string_view default_unit = "s");
[[nodiscard]] double parse_bandwidth(std::string_view text, std::string_view field);
[[nodiscard]] bool parse_bool(std::string_view text, std::string_view field);

}  // namespace rfidauth::config
