// Nonlinear longitudinal dynamics of a roll-stabilised, tail-controlled airframe.
//
// State: angle of attack, pitch rate, pitch attitude, Mach number, height and the
// second-order fin actuator (deflection, deflection rate). Aerodynamics are the
// cubic/quadratic/linear polynomial model in alpha with linear fin effectiveness.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "flightrl/atmosphere.hpp"
#include "flightrl/error.hpp"
#include "flightrl/integrator.hpp"

namespace flightrl {

struct PhysicalParams {
    double moment_of_inertia = 247.439;  // kg m^2
    double reference_area = 0.0409;      // m^2
    double reference_distance = 0.2286;  // m
    double mass = 204.02;                // kg
    double gravity = 9.8;                // m/s^2

    void validate() const {
        auto positive = [](double v, const char *name) {
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw ConfigError(name, "must be finite and > 0");
            }
        };
        positive(moment_of_inertia, "moment_of_inertia");
        positive(reference_area, "reference_area");
        positive(reference_distance, "reference_distance");
        positive(mass, "mass");
        positive(gravity, "gravity");
    }
};

struct AeroCoefficientsTable {
    double a_a = 0.3;
    double a_n = 19.373;
    double b_n = -31.023;
    double c_n = -9.717;
    double d_n = -1.948;
    double a_m = 40.44;
    double b_m = -64.015;
    double c_m = 2.922;
    double d_m = -11.803;

    void validate() const {
        if (d_n == 0.0) throw ConfigError("d_n", "control effectiveness must be non-zero");
        if (d_m == 0.0) throw ConfigError("d_m", "control effectiveness must be non-zero");
    }
};

struct ActuatorParams {
    double damping_ratio = 0.7;
    double natural_frequency = 150.0;  // rad/s

    void validate() const {
        if (!(damping_ratio > 0.0 && damping_ratio <= 1.0)) {
            throw ConfigError("damping_ratio", "must lie in (0, 1]");
        }
        if (!(natural_frequency > 0.0)) {
            throw ConfigError("natural_frequency", "must be > 0");
        }
    }
};

/// Everything needed to propagate the airframe.
struct AirframeModel {
    PhysicalParams physical;
    AeroCoefficientsTable aero;
    ActuatorParams actuator;
    std::optional<double> fin_limit;  // rad, symmetric clamp on the fin command
    int substeps = 4;

    void validate() const {
        physical.validate();
        aero.validate();
        actuator.validate();
        if (fin_limit && !(*fin_limit > 0.0)) throw ConfigError("fin_limit_deg", "must be > 0");
        if (substeps < 1) throw ConfigError("substeps", "must be >= 1");
    }
};

struct SystemState {
    double alpha = 0.0;      // rad
    double q = 0.0;          // rad/s
    double theta = 0.0;      // rad
    double mach = 0.0;
    double height = 0.0;     // m
    double delta = 0.0;      // rad
    double delta_dot = 0.0;  // rad/s

    double gamma() const { return theta - alpha; }

    bool finite() const {
        return std::isfinite(alpha) && std::isfinite(q) && std::isfinite(theta) &&
               std::isfinite(mach) && std::isfinite(height) && std::isfinite(delta) &&
               std::isfinite(delta_dot);
    }
};

struct AeroCoefficients {
    double c_a = 0.0;
    double c_n = 0.0;
    double c_m = 0.0;
};

struct AeroOutputs {
    double c_a = 0.0;
    double c_n = 0.0;
    double c_m = 0.0;
    double dynamic_pressure = 0.0;  // Pa
    double velocity = 0.0;          // m/s
    double lateral_accel = 0.0;     // m/s^2
};

/// Time derivatives of the rigid-body part of the state.
struct RigidBodyRates {
    double alpha_dot = 0.0;
    double q_dot = 0.0;
    double theta_dot = 0.0;
    double mach_dot = 0.0;
    double height_dot = 0.0;
};

inline AeroCoefficients aero_coefficients(double alpha, double mach, double delta,
                                          const AeroCoefficientsTable &t) {
    const double a3 = alpha * alpha * alpha;
    const double a_abs = alpha * std::abs(alpha);
    AeroCoefficients c;
    c.c_a = t.a_a;
    c.c_n = t.a_n * a3 + t.b_n * a_abs + t.c_n * (2.0 - mach / 3.0) * alpha + t.d_n * delta;
    c.c_m = t.a_m * a3 + t.b_m * a_abs + t.c_m * (-7.0 + 8.0 * mach / 3.0) * alpha + t.d_m * delta;
    return c;
}

namespace detail {

struct FlowConditions {
    double speed_of_sound;
    double velocity;
    double dynamic_pressure;
};

inline FlowConditions flow(double mach, double height) {
    FlowConditions f{};
    f.speed_of_sound = atmosphere::speed_of_sound(height);
    f.velocity = mach * f.speed_of_sound;
    f.dynamic_pressure = 0.5 * atmosphere::air_density(height) * f.velocity * f.velocity;
    return f;
}

inline RigidBodyRates rates(const SystemState &s, const FlowConditions &f,
                            const AeroCoefficients &c, const PhysicalParams &p) {
    const double gamma = s.gamma();
    const double qs = f.dynamic_pressure * p.reference_area;
    const double ca = std::cos(s.alpha);
    const double sa = std::sin(s.alpha);

    RigidBodyRates r;
    r.alpha_dot = qs / (p.mass * f.velocity) * (c.c_n * ca - c.c_a * sa) +
                  p.gravity / f.velocity * std::cos(gamma) + s.q;
    r.q_dot = qs * p.reference_distance / p.moment_of_inertia * c.c_m;
    r.theta_dot = s.q;
    r.mach_dot = qs / (p.mass * f.speed_of_sound) * (c.c_n * sa + c.c_a * ca) -
                 p.gravity / f.speed_of_sound * std::sin(gamma);
    r.height_dot = f.velocity * std::sin(gamma);
    return r;
}

} // namespace detail

/// d/dt of (alpha, q, theta, mach, height), evaluated with the current fin deflection.
inline RigidBodyRates state_derivative(const SystemState &s, const PhysicalParams &p,
                                       const AeroCoefficientsTable &t) {
    const auto f = detail::flow(s.mach, s.height);
    return detail::rates(s, f, aero_coefficients(s.alpha, s.mach, s.delta, t), p);
}

/// a_z = V * d(gamma)/dt = V * (q - alpha_dot).
inline double lateral_acceleration(const SystemState &s, const PhysicalParams &p,
                                   const AeroCoefficientsTable &t) {
    const auto f = detail::flow(s.mach, s.height);
    const auto r = detail::rates(s, f, aero_coefficients(s.alpha, s.mach, s.delta, t), p);
    return f.velocity * (r.theta_dot - r.alpha_dot);
}

inline AeroOutputs aero_outputs(const SystemState &s, const PhysicalParams &p,
                                const AeroCoefficientsTable &t) {
    const auto f = detail::flow(s.mach, s.height);
    const auto c = aero_coefficients(s.alpha, s.mach, s.delta, t);
    const auto r = detail::rates(s, f, c, p);
    AeroOutputs out;
    out.c_a = c.c_a;
    out.c_n = c.c_n;
    out.c_m = c.c_m;
    out.dynamic_pressure = f.dynamic_pressure;
    out.velocity = f.velocity;
    out.lateral_accel = f.velocity * (r.theta_dot - r.alpha_dot);
    return out;
}

struct ActuatorRates {
    double delta_dot = 0.0;
    double delta_ddot = 0.0;
};

inline ActuatorRates actuator_derivative(double delta, double delta_dot, double delta_c,
                                         const ActuatorParams &a) {
    const double w2 = a.natural_frequency * a.natural_frequency;
    return {delta_dot,
            -w2 * delta - 2.0 * a.damping_ratio * a.natural_frequency * delta_dot + w2 * delta_c};
}

namespace detail {

using PackedState = std::array<double, 7>;

inline PackedState pack(const SystemState &s) {
    return {s.alpha, s.q, s.theta, s.mach, s.height, s.delta, s.delta_dot};
}

inline SystemState unpack(const PackedState &x) {
    return {x[0], x[1], x[2], x[3], x[4], x[5], x[6]};
}

} // namespace detail

/// Advances the coupled 7-state system by dt with the fin command held constant.
/// Uses model.substeps equal RK4 substeps. Throws DivergenceError on a non-finite result.
inline SystemState integrate_step(const SystemState &state, double delta_c, double dt,
                                  const AirframeModel &model) {
    if (!(dt > 0.0)) throw ContractViolation("integrate_step: dt must be > 0");
    if (model.fin_limit) {
        delta_c = std::clamp(delta_c, -*model.fin_limit, *model.fin_limit);
    }

    auto f = [&](const detail::PackedState &x) {
        const SystemState s = detail::unpack(x);
        const RigidBodyRates r = state_derivative(s, model.physical, model.aero);
        const ActuatorRates a = actuator_derivative(s.delta, s.delta_dot, delta_c, model.actuator);
        return detail::PackedState{r.alpha_dot, r.q_dot,     r.theta_dot,   r.mach_dot,
                                   r.height_dot, a.delta_dot, a.delta_ddot};
    };

    detail::PackedState x = detail::pack(state);
    const double h = dt / model.substeps;
    for (int i = 0; i < model.substeps; ++i) {
        x = rk4_step<7>(f, x, h);
    }

    SystemState next = detail::unpack(x);
    if (!next.finite()) {
        throw DivergenceError("integrate_step: non-finite state");
    }
    return next;
}

} // namespace flightrl
