#include "rfidauth/radio.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rfidauth::radio {

namespace {
constexpr double kSpeedOfLight = 299'792'458.0;
}

double tx_duration(std::size_t bits, double bandwidth_bps) {
    if (!(bandwidth_bps > 0.0)) {
        throw std::invalid_argument("bandwidth must be positive");
    }
    return static_cast<double>(bits) / bandwidth_bps;
}

bool in_range(GroundPos pos, const RadioParams& params) {
    const double r = params.coverage_radius_m;
    switch (params.coverage) {
        case CoverageModel::Strip:
            return std::abs(pos.x) <= r && std::abs(pos.y) <= r;
        case CoverageModel::Disc:
            return std::hypot(pos.x, pos.y) <= r;
    }
    return false;
}

double antenna_distance(GroundPos pos, const RadioParams& params) {
    const double dz = params.reader_antenna_height_m - params.tag_antenna_height_m;
    return std::sqrt(pos.x * pos.x + pos.y * pos.y + dz * dz);
}

double reference_path_loss_db(const RadioParams& params) {
    const double wavelength = kSpeedOfLight / params.frequency_hz;
    return 20.0 * std::log10(4.0 * std::numbers::pi * params.reference_distance_m / wavelength);
}

double mean_margin_db(double distance_m, LinkDirection dir, const RadioParams& params) {
    const double d = std::max(distance_m, params.reference_distance_m);
    const double loss = reference_path_loss_db(params) +
                        10.0 * params.path_loss_exponent * std::log10(d / params.reference_distance_m);
    if (dir == LinkDirection::Downlink) {
        return params.reader_tx_dbm - loss - params.tag_sensitivity_dbm;
    }
    return params.tag_tx_dbm - loss - params.reader_sensitivity_dbm;
}

bool link_success(GroundPos pos, LinkDirection dir, const RadioParams& params, SeededRng& rng) {
    if (!params.shadowing) {
        return in_range(pos, params);
    }
    const double margin = mean_margin_db(antenna_distance(pos, params), dir, params);
    return margin + rng.normal(0.0, params.shadowing_sigma_db) >= 0.0;
}

}  // namespace rfidauth::radio
