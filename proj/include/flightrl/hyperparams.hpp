#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "flightrl/envelope.hpp"
#include "flightrl/error.hpp"
#include "flightrl/mlp.hpp"

namespace flightrl {

struct RewardParams {
    double k_a = 1.0;
    double k_delta = 0.1;
    double a_z_max = 100.0;        // m/s^2
    double delta_dot_max = 1.5;    // rad/s
};

struct ObservationScale {
    double alpha = deg2rad(20.0);  // rad
    double mach = 4.0;
    double height = 14000.0;       // m
};

struct HyperParameters {
    int max_steps = 200;
    int max_episodes = 1000;
    double actor_lr = 1e-3;
    double critic_lr = 1e-3;
    double l2 = 6e-3;
    double clip = 1.0;
    double discount = 0.99;
    double sample_time = 0.01;  // s
    std::size_t buffer_capacity = 500000;
    std::size_t batch_size = 64;
    double noise_mean = 0.0;
    double noise_sigma = 0.1;   // variance of the OU innovation
    double noise_decay = 1e-6;
    double noise_attraction = 0.15;
    double tau = 0.001;

    RewardParams reward;
    ObservationScale observation;
    nn::GainLimits gain_limits;
    std::vector<int> hidden = {64, 64};

    void validate() const {
        auto positive = [](double v, const char *name) {
            if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(name, "must be finite and > 0");
        };
        auto non_negative = [](double v, const char *name) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(name, "must be finite and >= 0");
        };
        if (max_steps < 1) throw ConfigError("max_steps", "must be >= 1");
        if (max_episodes < 0) throw ConfigError("max_episodes", "must be >= 0");
        positive(actor_lr, "actor_lr");
        positive(critic_lr, "critic_lr");
        non_negative(l2, "l2");
        positive(clip, "clip");
        if (!(discount > 0.0 && discount <= 1.0)) throw ConfigError("discount", "must lie in (0, 1]");
        positive(sample_time, "sample_time");
        if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
        if (buffer_capacity < batch_size) {
            throw ConfigError("buffer_capacity", "must be >= batch_size");
        }
        if (!std::isfinite(noise_mean)) throw ConfigError("noise_mean", "must be finite");
        non_negative(noise_sigma, "noise_sigma");
        if (!(noise_decay >= 0.0 && noise_decay < 1.0)) {
            throw ConfigError("noise_decay", "must lie in [0, 1)");
        }
        non_negative(noise_attraction, "noise_attraction");
        if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau", "must lie in (0, 1]");

        positive(reward.k_a, "reward_k_a");
        non_negative(reward.k_delta, "reward_k_delta");
        positive(reward.a_z_max, "reward_a_z_max");
        positive(reward.delta_dot_max, "reward_delta_dot_max");
        positive(observation.alpha, "norm_alpha_deg");
        positive(observation.mach, "norm_mach");
        positive(observation.height, "norm_height");
        positive(gain_limits.k_dc, "gain_max_k_dc");
        positive(gain_limits.k_a, "gain_max_k_a");
        positive(gain_limits.k_i, "gain_max_k_i");
        positive(gain_limits.k_g, "gain_max_k_g");
        if (hidden.empty()) throw ConfigError("hidden_layers", "need at least one hidden layer");
        for (int h : hidden) {
            if (h < 1 || h > 4096) throw ConfigError("hidden_layers", "sizes must lie in [1, 4096]");
        }
    }
};

} // namespace flightrl
