// International Standard Atmosphere, troposphere and lower stratosphere.
#pragma once

#include <cmath>
#include <string>

#include "flightrl/error.hpp"

namespace flightrl::atmosphere {

inline constexpr double kSeaLevelTemperature = 288.15;  // K
inline constexpr double kSeaLevelDensity = 1.225;       // kg/m^3
inline constexpr double kLapseRate = 0.0065;            // K/m
inline constexpr double kGasConstant = 287.05287;       // J/(kg K)
inline constexpr double kStandardGravity = 9.80665;     // m/s^2
inline constexpr double kHeatRatio = 1.4;
inline constexpr double kTropopause = 11000.0;          // m
inline constexpr double kCeiling = 20000.0;             // m
inline constexpr double kTropopauseTemperature =
    kSeaLevelTemperature - kLapseRate * kTropopause;    // 216.65 K

namespace detail {

inline void check_height(double height) {
    if (!(height >= 0.0 && height <= kCeiling)) {
        throw DomainError("atmosphere: height " + std::to_string(height) +
                          " m outside [0, 20000]");
    }
}

inline double tropopause_density() {
    return kSeaLevelDensity *
           std::pow(kTropopauseTemperature / kSeaLevelTemperature,
                    kStandardGravity / (kLapseRate * kGasConstant) - 1.0);
}

} // namespace detail

inline double temperature(double height) {
    detail::check_height(height);
    if (height <= kTropopause) {
        return kSeaLevelTemperature - kLapseRate * height;
    }
    return kTropopauseTemperature;
}

/// Air density [kg/m^3] for 0 <= height <= 20000 m. Throws DomainError outside.
inline double air_density(double height) {
    const double t = temperature(height);
    if (height <= kTropopause) {
        return kSeaLevelDensity *
               std::pow(t / kSeaLevelTemperature,
                        kStandardGravity / (kLapseRate * kGasConstant) - 1.0);
    }
    // isothermal layer: exponential decay with scale height R T / g
    return detail::tropopause_density() *
           std::exp(-kStandardGravity * (height - kTropopause) /
                    (kGasConstant * kTropopauseTemperature));
}

/// Speed of sound [m/s]; constant above the tropopause.
inline double speed_of_sound(double height) {
    return std::sqrt(kHeatRatio * kGasConstant * temperature(height));
}

} // namespace flightrl::atmosphere
