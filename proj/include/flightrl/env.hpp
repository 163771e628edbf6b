// Episode environment around the airframe and the three-loop autopilot: envelope
// sampling, observation scaling, shaped reference command, reward and the control step.
#pragma once

#include <cmath>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "flightrl/airframe.hpp"
#include "flightrl/autopilot.hpp"
#include "flightrl/envelope.hpp"
#include "flightrl/error.hpp"
#include "flightrl/hyperparams.hpp"
#include "flightrl/integrator.hpp"
#include "flightrl/mlp.hpp"

namespace flightrl {

// ---------------------------------------------------------------------------
// Reference model
// ---------------------------------------------------------------------------

/// (b1 s + 1) / (a2 s^2 + a1 s + 1) realised as a2 x1'' + a1 x1' + x1 = u,
/// x2 = x1', y = x1 + b1 x2.
struct ReferenceModel {
    double b1 = -0.0363;
    double a2 = 0.009;
    double a1 = 0.33;

    void validate() const {
        if (!(a2 > 0.0 && a1 > 0.0)) throw ConfigError("reference_model", "denominator must be Hurwitz");
    }
};

struct ReferenceModelState {
    double x1 = 0.0;
    double x2 = 0.0;
    double output = 0.0;  // shaped command
};

inline double reference_output(const ReferenceModel &m, double x1, double x2) {
    return x1 + m.b1 * x2;
}

/// Advances the filter by one RK4 step of length dt with the command held.
inline ReferenceModelState reference_step(const ReferenceModelState &ref, double a_zc, double dt,
                                          const ReferenceModel &m = {}) {
    if (!(dt > 0.0)) throw ContractViolation("reference_step: dt must be > 0");
    auto f = [&](const std::array<double, 2> &x) {
        return std::array<double, 2>{x[1], (a_zc - x[0] - m.a1 * x[1]) / m.a2};
    };
    const auto x = rk4_step<2>(f, {ref.x1, ref.x2}, dt);
    return {x[0], x[1], reference_output(m, x[0], x[1])};
}

// ---------------------------------------------------------------------------
// Reward and observation
// ---------------------------------------------------------------------------

inline double reward(double a_z, double a_z_ref, double delta_dot, const RewardParams &p) {
    const double e = (a_z - a_z_ref) / p.a_z_max;
    const double r = delta_dot / p.delta_dot_max;
    return -p.k_a * e * e - p.k_delta * r * r;
}

inline Eigen::Vector3d observe(const SystemState &s, const ObservationScale &scale,
                               bool normalize = true) {
    if (!normalize) return {s.alpha, s.mach, s.height};
    return {s.alpha / scale.alpha, s.mach / scale.mach, s.height / scale.height};
}

// ---------------------------------------------------------------------------
// Episode
// ---------------------------------------------------------------------------

enum class ActionMode { gains, direct_fin };

struct DivergenceBounds {
    double alpha = deg2rad(60.0);  // rad
    double q = 20.0;               // rad/s
    double height_min = 0.0;       // m

    bool violated(const SystemState &s) const {
        return !s.finite() || std::abs(s.alpha) > alpha || std::abs(s.q) > q || s.height <= height_min;
    }
};

struct EnvOptions {
    bool shaped_reward = true;
    bool normalize = true;
    ActionMode action_mode = ActionMode::gains;
    double command = 100.0;                // m/s^2
    double direct_fin_scale = deg2rad(30.0);  // rad per unit action
    DivergenceBounds bounds;
};

struct Environment {
    AirframeModel model;
    HyperParameters hp;
    Envelope envelope;
    EnvOptions options;
    ReferenceModel reference;

    int action_size() const { return options.action_mode == ActionMode::gains ? 4 : 1; }
    static constexpr int observation_size() { return 3; }
};

struct EpisodeState {
    SystemState sys;
    ControllerState ctrl;
    ReferenceModelState ref;
    int step = 0;
    double a_zc = 0.0;
    double a_z = 0.0;  // lateral acceleration at the current state
    bool diverged = false;
};

namespace detail {

inline double sample_axis(const Range &r, std::mt19937_64 &rng) {
    if (r.min == r.max) return r.min;
    return std::uniform_real_distribution<double>(r.min, r.max)(rng);
}

} // namespace detail

/// Level flight-path start at (alpha, mach, height) with actuator, filter and integrator
/// at rest.
inline EpisodeState make_episode(const Environment &env, double alpha, double mach, double height) {
    EpisodeState ep;
    ep.sys.alpha = alpha;
    ep.sys.theta = alpha;
    ep.sys.mach = mach;
    ep.sys.height = height;
    ep.a_zc = env.options.command;
    ep.a_z = lateral_acceleration(ep.sys, env.model.physical, env.model.aero);
    return ep;
}

inline EpisodeState reset(const Environment &env, std::mt19937_64 &rng) {
    const double alpha = detail::sample_axis(env.envelope.alpha, rng);
    const double mach = detail::sample_axis(env.envelope.mach, rng);
    const double height = detail::sample_axis(env.envelope.height, rng);
    return make_episode(env, alpha, mach, height);
}

/// Places the airframe at level trim and primes the integrator so that the first
/// command with gains `g` reproduces the trim fin.
inline void start_at_trim(const Environment &env, EpisodeState &ep, const TrimPoint &t,
                          const GainSet &g) {
    ep.sys.alpha = t.alpha;
    ep.sys.theta = t.alpha;
    ep.sys.q = 0.0;
    ep.sys.delta = t.delta;
    ep.sys.delta_dot = 0.0;
    ep.ctrl.integrator = g.k_g != 0.0 ? t.delta / g.k_g : 0.0;
    ep.a_z = lateral_acceleration(ep.sys, env.model.physical, env.model.aero);
}

inline Eigen::Vector3d observe(const Environment &env, const EpisodeState &ep) {
    return observe(ep.sys, env.hp.observation, env.options.normalize);
}

struct StepResult {
    Eigen::Vector3d observation;
    double reward = 0.0;
    bool done = false;
    bool diverged = false;
    double delta_c = 0.0;
    GainSet gains;
};

namespace detail {

inline StepResult advance(const Environment &env, EpisodeState &ep, double delta_c) {
    StepResult res;
    res.delta_c = delta_c;
    const double dt = env.hp.sample_time;

    bool diverged = false;
    try {
        SystemState next = integrate_step(ep.sys, delta_c, dt, env.model);
        diverged = env.options.bounds.violated(next);
        const double a_z = lateral_acceleration(next, env.model.physical, env.model.aero);
        if (!std::isfinite(a_z)) throw DivergenceError("non-finite lateral acceleration");
        ep.sys = next;
        ep.a_z = a_z;
    } catch (const DivergenceError &) {
        diverged = true;
    } catch (const DomainError &) {
        diverged = true;
    }
    // On a failed step the last valid state is kept and scored again.

    ep.ref = reference_step(ep.ref, ep.a_zc, dt, env.reference);
    const double target = env.options.shaped_reward ? ep.ref.output : ep.a_zc;
    res.reward = reward(ep.a_z, target, ep.sys.delta_dot, env.hp.reward);
    ++ep.step;
    ep.diverged = diverged;

    res.observation = observe(env, ep);
    res.diverged = diverged;
    res.done = diverged || ep.step >= env.hp.max_steps;
    return res;
}

} // namespace detail

/// One control period with explicit gains.
inline StepResult step_gains(const Environment &env, EpisodeState &ep, const GainSet &g) {
    const ControlOutput u =
        three_loop_command(g, ep.a_zc, ep.a_z, ep.sys.q, ep.ctrl, env.hp.sample_time);
    ep.ctrl = u.next;
    StepResult res = detail::advance(env, ep, u.delta_c);
    res.gains = g;
    return res;
}

/// One control period with a normalised action: four gain components in gains mode, a
/// single fin component in direct_fin mode.
inline StepResult step(const Environment &env, EpisodeState &ep,
                       const Eigen::Ref<const Eigen::VectorXd> &action) {
    if (action.size() != env.action_size()) {
        throw ContractViolation("step: action has " + std::to_string(action.size()) +
                                " components, expected " + std::to_string(env.action_size()));
    }
    if (env.options.action_mode == ActionMode::gains) {
        return step_gains(env, ep, nn::scale_actor_output(action, env.hp.gain_limits));
    }
    return detail::advance(env, ep, action(0) * env.options.direct_fin_scale);
}

} // namespace flightrl
