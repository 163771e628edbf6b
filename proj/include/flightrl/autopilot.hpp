// Three-loop acceleration autopilot, trim and small-perturbation linearisation.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "flightrl/airframe.hpp"
#include "flightrl/error.hpp"

namespace flightrl {

struct GainSet {
    double k_dc = 0.0;  // command feed-forward
    double k_a = 0.0;   // acceleration error -> rate command, rad/s per m/s^2
    double k_i = 0.0;   // integral gain, 1/s
    double k_g = 0.0;   // rate error -> fin command, s

    bool finite() const {
        return std::isfinite(k_dc) && std::isfinite(k_a) && std::isfinite(k_i) &&
               std::isfinite(k_g);
    }

    friend bool operator==(const GainSet &, const GainSet &) = default;
};

struct ControllerState {
    double integrator = 0.0;
};

struct ControlOutput {
    double delta_c = 0.0;
    ControllerState next;
};

/// One control period of the three-loop law (forward-Euler integral):
///   e       = K_DC a_zc - a_z
///   I'      = I + dt K_I (K_A e - q)
///   delta_c = K_g (I' - q)
inline ControlOutput three_loop_command(const GainSet &g, double a_zc, double a_z, double q,
                                        const ControllerState &ctrl, double dt) {
    if (!(dt > 0.0)) throw ContractViolation("three_loop_command: dt must be > 0");
    const double error = g.k_dc * a_zc - a_z;
    ControlOutput out;
    out.next.integrator = ctrl.integrator + dt * g.k_i * (g.k_a * error - q);
    out.delta_c = g.k_g * (out.next.integrator - q);
    return out;
}

// ---------------------------------------------------------------------------
// Trim
// ---------------------------------------------------------------------------

struct TrimPoint {
    double alpha = 0.0;  // rad
    double delta = 0.0;  // rad
};

inline constexpr int kTrimMaxIterations = 50;
inline constexpr double kTrimTolerance = 1e-10;

/// Fin deflection giving zero pitching moment at the given alpha and Mach (q_dot = 0).
inline double trim_fin(double alpha, double mach, const AeroCoefficientsTable &table) {
    double delta = 0.0;
    for (int it = 0; it < kTrimMaxIterations; ++it) {
        const double residual = aero_coefficients(alpha, mach, delta, table).c_m;
        if (std::abs(residual) < kTrimTolerance) return delta;
        // c_m is affine in delta with slope d_m
        delta -= residual / table.d_m;
    }
    throw TrimError("trim_fin: no convergence at alpha=" + std::to_string(alpha) +
                    " mach=" + std::to_string(mach));
}

namespace detail {

inline SystemState level_state(double alpha, double mach, double height, double delta) {
    SystemState s;
    s.alpha = alpha;
    s.theta = alpha;  // gamma = 0
    s.mach = mach;
    s.height = height;
    s.delta = delta;
    return s;
}

} // namespace detail

/// Level-flight (gamma = 0, q = 0) equilibrium: a_z = 0 and C_M = 0.
/// Newton iteration on alpha with the fin trimmed at every iterate.
inline TrimPoint trim(double mach, double height, const PhysicalParams &params,
                      const AeroCoefficientsTable &table) {
    auto accel = [&](double alpha) {
        const double delta = trim_fin(alpha, mach, table);
        return lateral_acceleration(detail::level_state(alpha, mach, height, delta), params,
                                    table);
    };

    double alpha = 0.0;
    for (int it = 0; it < kTrimMaxIterations; ++it) {
        const double residual = accel(alpha);
        if (std::abs(residual) < kTrimTolerance) {
            return {alpha, trim_fin(alpha, mach, table)};
        }
        const double h = 1e-7;
        const double slope = (accel(alpha + h) - accel(alpha - h)) / (2.0 * h);
        if (!(std::abs(slope) > 0.0) || !std::isfinite(slope)) break;
        alpha -= std::clamp(residual / slope, -0.05, 0.05);
    }
    throw TrimError("trim: no convergence at mach=" + std::to_string(mach) +
                    " height=" + std::to_string(height));
}

// ---------------------------------------------------------------------------
// Linearisation
// ---------------------------------------------------------------------------

/// Short-period model x = (alpha, q), u = delta, y = a_z, in deviation variables.
struct LinearModel {
    Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
    Eigen::Vector2d B = Eigen::Vector2d::Zero();
    Eigen::RowVector2d C = Eigen::RowVector2d::Zero();
    double D = 0.0;
    SystemState trim_point;
    double velocity = 0.0;
};

inline constexpr double kLinearizeStep = 1e-6;

/// Central-difference Jacobians of (alpha_dot, q_dot, a_z) with respect to alpha, q and
/// delta, holding theta, Mach and height fixed. Step is kLinearizeStep * max(1, |x|)
/// unless overridden.
inline LinearModel linearize(SystemState state, double delta, const PhysicalParams &params,
                             const AeroCoefficientsTable &table, double step = kLinearizeStep) {
    state.delta = delta;
    auto eval = [&](const SystemState &s) {
        const RigidBodyRates r = state_derivative(s, params, table);
        return Eigen::Vector3d(r.alpha_dot, r.q_dot, lateral_acceleration(s, params, table));
    };

    auto column = [&](double SystemState::*member) {
        const double h = step * std::max(1.0, std::abs(state.*member));
        SystemState plus = state;
        SystemState minus = state;
        plus.*member += h;
        minus.*member -= h;
        return Eigen::Vector3d((eval(plus) - eval(minus)) / (2.0 * h));
    };

    const Eigen::Vector3d d_alpha = column(&SystemState::alpha);
    const Eigen::Vector3d d_q = column(&SystemState::q);
    const Eigen::Vector3d d_delta = column(&SystemState::delta);

    LinearModel m;
    m.A << d_alpha(0), d_q(0), d_alpha(1), d_q(1);
    m.B << d_delta(0), d_delta(1);
    m.C << d_alpha(2), d_q(2);
    m.D = d_delta(2);
    m.trim_point = state;
    m.velocity = state.mach * atmosphere::speed_of_sound(state.height);
    return m;
}

} // namespace flightrl
