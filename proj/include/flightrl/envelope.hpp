#pragma once

#include <numbers>

#include "flightrl/error.hpp"

namespace flightrl {

inline constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

struct Range {
    double min = 0.0;
    double max = 0.0;

    double mid() const { return 0.5 * (min + max); }
    double span() const { return max - min; }
};

/// Flight envelope used for episode initialisation and gain-schedule grids.
struct Envelope {
    Range alpha{deg2rad(-20.0), deg2rad(20.0)};  // rad
    Range height{6000.0, 14000.0};               // m
    Range mach{2.0, 4.0};

    // Degenerate ranges (min == max) are allowed and pin that axis.
    void validate() const {
        if (!(alpha.min <= alpha.max)) throw ConfigError("envelope_alpha", "min > max");
        if (!(height.min <= height.max)) throw ConfigError("envelope_height", "min > max");
        if (!(mach.min <= mach.max)) throw ConfigError("envelope_mach", "min > max");
        if (!(height.min > 0.0 && height.max <= 20000.0)) {
            throw ConfigError("envelope_height", "must lie in (0, 20000] m");
        }
        if (!(mach.min > 0.0)) throw ConfigError("envelope_mach", "must be > 0");
    }
};

} // namespace flightrl
