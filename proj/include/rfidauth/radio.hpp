#pragma once

#include <cstddef>

#include "rfidauth/rng.hpp"

namespace rfidauth::radio {

/// How the reader's interrogation zone is projected onto the road.
///   Strip: in range iff the along-road distance to the reader is within the
///          coverage radius (every lane sees a full 2r chord).
///   Disc:  in range iff the ground distance to the point under the reader is
///          within the coverage radius.
enum class CoverageModel { Strip, Disc };

struct RadioParams {
    double tag_power_w = 0.040;
    double reader_power_w = 10.0;
    double tag_tx_dbm = -10.0;
    double reader_tx_dbm = 0.0;
    double tag_sensitivity_dbm = -70.0;
    double reader_sensitivity_dbm = -82.0;
    double tag_antenna_height_m = 1.0;
    double reader_antenna_height_m = 5.0;
    double frequency_hz = 900e6;
    double coverage_radius_m = 10.0;
    double path_loss_exponent = 4.0;
    double shadowing_sigma_db = 2.0;
    double reference_distance_m = 1.0;
    double bandwidth_bps = 256e3;
    bool shadowing = false;
    CoverageModel coverage = CoverageModel::Strip;
};

/// Ground-plane coordinates relative to the point under the reader:
/// x along the direction of travel, y across lanes.
struct GroundPos {
    double x = 0.0;
    double y = 0.0;
};

enum class LinkDirection {
    Downlink,  ///< reader -> tag
    Uplink,    ///< tag -> reader
};

/// bits / bandwidth, in seconds.
[[nodiscard]] double tx_duration(std::size_t bits, double bandwidth_bps);

[[nodiscard]] bool in_range(GroundPos pos, const RadioParams& params);

/// Straight-line antenna separation, including the antenna height difference.
[[nodiscard]] double antenna_distance(GroundPos pos, const RadioParams& params);

/// Free-space loss at the reference distance.
[[nodiscard]] double reference_path_loss_db(const RadioParams& params);

/// Mean received power minus receiver sensitivity (no shadowing term).
[[nodiscard]] double mean_margin_db(double distance_m, LinkDirection dir, const RadioParams& params);

/// Log-distance path loss with Gaussian shadowing when `params.shadowing` is
/// set; otherwise identical to in_range(pos).
[[nodiscard]] bool link_success(GroundPos pos, LinkDirection dir, const RadioParams& params, SeededRng& rng);

}  // namespace rfidauth::radio
