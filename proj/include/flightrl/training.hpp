// Training loop, policy rollouts and per-run tracking metrics.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "flightrl/ddpg.hpp"
#include "flightrl/env.hpp"
#include "flightrl/schedule.hpp"

namespace flightrl {

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

enum class Stream : std::uint32_t { init = 1, noise = 2, sampling = 3, scenario = 4 };

inline std::mt19937_64 make_stream(std::uint64_t seed, Stream s) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(s), 0x5eedu};
    return std::mt19937_64(seq);
}

/// One seed fans out to independent generators so that changing how often one
/// consumer draws leaves the others untouched.
struct RngStreams {
    std::mt19937_64 init;
    std::mt19937_64 noise;
    std::mt19937_64 sampling;
    std::mt19937_64 scenario;

    explicit RngStreams(std::uint64_t seed)
        : init(make_stream(seed, Stream::init)), noise(make_stream(seed, Stream::noise)),
          sampling(make_stream(seed, Stream::sampling)),
          scenario(make_stream(seed, Stream::scenario)) {}
};

inline ddpg::Agent make_agent(const Environment &env, std::mt19937_64 &rng) {
    return ddpg::make_agent(Environment::observation_size(), env.action_size(), env.hp.hidden, rng);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct CurveRow {
    int episode = 0;
    int steps = 0;
    double episode_reward = 0.0;
    double avg_reward_30 = 0.0;
    double sigma = 0.0;
    bool diverged = false;
};

inline constexpr int kAverageWindow = 30;

struct TrainResult {
    ddpg::Agent agent;
    ddpg::Agent best_agent;  // actor that produced the largest episode reward
    double best_reward = -INFINITY;
    int best_episode = -1;
    std::vector<CurveRow> curve;
    long long updates = 0;
    std::string failure;  // set when an update went non-finite; the curve is partial

    bool ok() const { return failure.empty(); }
};

using EpisodeCallback = std::function<void(const CurveRow &)>;

/// Runs `episodes` episodes of noisy interaction with a gradient update after every
/// step once the buffer holds a full minibatch. A non-finite update stops training and
/// is reported through `failure` with the episodes completed so far.
inline TrainResult train(const Environment &env, ddpg::Agent agent, RngStreams &rng, int episodes,
                         const EpisodeCallback &on_episode = {}) {
    const HyperParameters &hp = env.hp;
    TrainResult out;
    out.best_agent = agent;
    ddpg::ReplayBuffer buffer(hp.buffer_capacity);
    ddpg::OuNoise noise = ddpg::make_noise(agent.action_size(), hp);
    std::deque<double> window;
    double window_sum = 0.0;

    for (int e = 0; e < episodes; ++e) {
        EpisodeState ep = reset(env, rng.scenario);
        noise.reset();
        Eigen::VectorXd obs = observe(env, ep);
        double total = 0.0;
        bool done = false;
        while (!done) {
            const Eigen::VectorXd v = ddpg::ou_step(noise, rng.noise);
            const auto choice = ddpg::select_action(agent, obs, &v);
            const StepResult res = step(env, ep, choice.executed);
            total += res.reward;
            done = res.done;
            buffer.push({obs, choice.executed, res.reward, res.observation, res.done});
            obs = res.observation;

            if (auto batch = buffer.sample(hp.batch_size, rng.sampling)) {
                try {
                    ddpg::critic_update(agent, *batch, hp);
                    ddpg::actor_update(agent, *batch, hp);
                } catch (const DivergenceError &err) {
                    out.failure = "episode " + std::to_string(e) + ": " + err.what();
                    break;
                }
                ddpg::update_targets(agent, hp.tau);
                ++out.updates;
            }
        }
        if (!out.ok()) break;

        window.push_back(total);
        window_sum += total;
        if (static_cast<int>(window.size()) > kAverageWindow) {
            window_sum -= window.front();
            window.pop_front();
        }
        CurveRow row{e, ep.step, total, window_sum / static_cast<double>(window.size()), noise.sigma,
                     ep.diverged};
        out.curve.push_back(row);
        if (total > out.best_reward) {
            out.best_reward = total;
            out.best_episode = e;
            out.best_agent = agent;
        }
        if (on_episode) on_episode(row);
    }
    out.agent = std::move(agent);
    if (out.best_episode < 0) out.best_agent = out.agent;
    return out;
}

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

struct TrajectoryRow {
    double t = 0.0;
    double a_zc = 0.0;
    double a_zc_shaped = 0.0;
    double a_z = 0.0;
    SystemState state;
    double delta_c = 0.0;
    GainSet gains;
    double reward = 0.0;
};

struct Trajectory {
    std::vector<TrajectoryRow> rows;
    double total_reward = 0.0;
    bool diverged = false;
};

using Policy = std::function<StepResult(const Environment &, EpisodeState &)>;

inline Policy agent_policy(const ddpg::Agent &agent) {
    return [&agent](const Environment &env, EpisodeState &ep) {
        const auto choice = ddpg::select_action(agent, observe(env, ep), nullptr);
        return step(env, ep, choice.executed);
    };
}

inline Policy schedule_policy(const GainSchedule &schedule) {
    return [&schedule](const Environment &env, EpisodeState &ep) {
        const GainSet g = schedule_gains(schedule, ep.sys.alpha, ep.sys.mach, ep.sys.height);
        return step_gains(env, ep, g);
    };
}

inline Trajectory rollout(const Environment &env, EpisodeState ep, const Policy &policy) {
    Trajectory tr;
    tr.rows.reserve(static_cast<std::size_t>(env.hp.max_steps));
    bool done = false;
    while (!done) {
        const StepResult res = policy(env, ep);
        TrajectoryRow row;
        row.t = ep.step * env.hp.sample_time;
        row.a_zc = ep.a_zc;
        row.a_zc_shaped = ep.ref.output;
        row.a_z = ep.a_z;
        row.state = ep.sys;
        row.delta_c = res.delta_c;
        row.gains = res.gains;
        row.reward = res.reward;
        tr.rows.push_back(row);
        tr.total_reward += res.reward;
        done = res.done;
        tr.diverged = res.diverged;
    }
    return tr;
}

struct RunSummary {
    double steady_state_error = 0.0;  // mean |a_z - shaped command| over the final window
    double final_error = 0.0;         // |a_z - a_zc| at the last sample
    double overshoot = 0.0;           // m/s^2 beyond the command, in its direction
    double undershoot = 0.0;          // m/s^2 opposite to the command
    double max_abs_delta = 0.0;       // rad
    double max_abs_delta_dot = 0.0;   // rad/s
    double total_reward = 0.0;
    int steps = 0;
    bool diverged = false;
};

inline RunSummary summarize(const Trajectory &tr, double sample_time, double window = 0.5) {
    RunSummary s;
    s.total_reward = tr.total_reward;
    s.diverged = tr.diverged;
    s.steps = static_cast<int>(tr.rows.size());
    if (tr.rows.empty()) return s;

    const double command = tr.rows.back().a_zc;
    const double dir = command < 0.0 ? -1.0 : 1.0;
    double peak = -INFINITY;
    double trough = INFINITY;
    for (const auto &r : tr.rows) {
        peak = std::max(peak, dir * r.a_z);
        trough = std::min(trough, dir * r.a_z);
        s.max_abs_delta = std::max(s.max_abs_delta, std::abs(r.state.delta));
        s.max_abs_delta_dot = std::max(s.max_abs_delta_dot, std::abs(r.state.delta_dot));
    }
    s.overshoot = std::max(0.0, peak - std::abs(command));
    s.undershoot = std::max(0.0, -trough);

    const auto n = static_cast<std::size_t>(std::llround(window / sample_time));
    const std::size_t count = std::max<std::size_t>(1, std::min(n, tr.rows.size()));
    double sum = 0.0;
    for (std::size_t i = tr.rows.size() - count; i < tr.rows.size(); ++i) {
        sum += std::abs(tr.rows[i].a_z - tr.rows[i].a_zc_shaped);
    }
    s.steady_state_error = sum / static_cast<double>(count);
    s.final_error = std::abs(tr.rows.back().a_z - command);
    return s;
}

} // namespace flightrl
