// Experiment configuration: flat `key = value` text with `#` comments.
#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "flightrl/airframe.hpp"
#include "flightrl/env.hpp"
#include "flightrl/envelope.hpp"
#include "flightrl/error.hpp"
#include "flightrl/hyperparams.hpp"
#include "flightrl/schedule.hpp"
#include "flightrl/textio.hpp"

namespace flightrl {

struct ExperimentConfig {
    HyperParameters hp;
    Envelope envelope;
    EnvOptions options;
    AirframeModel model;
    ReferenceModel reference;
    GridSpec grid;
    LqrWeights lqr;
    std::uint64_t seed = 0;
    int eval_runs = 20;

    void validate() const {
        hp.validate();
        envelope.validate();
        model.validate();
        reference.validate();
        if (!std::isfinite(options.command)) throw ConfigError("command", "must be finite");
        if (!(options.direct_fin_scale > 0.0)) throw ConfigError("direct_fin_scale_deg", "must be > 0");
        if (!(options.bounds.alpha > 0.0)) throw ConfigError("diverge_alpha_deg", "must be > 0");
        if (!(options.bounds.q > 0.0)) throw ConfigError("diverge_q", "must be > 0");
        if (grid.n_alpha < 1 || grid.n_mach < 1 || grid.n_height < 1) {
            throw ConfigError("grid", "every axis needs at least one node");
        }
        if (!(lqr.q_integral > 0.0)) throw ConfigError("lqr_q_integral", "must be > 0");
        if (!(lqr.q_alpha >= 0.0)) throw ConfigError("lqr_q_alpha", "must be >= 0");
        if (!(lqr.q_rate >= 0.0)) throw ConfigError("lqr_q_rate", "must be >= 0");
        if (!(lqr.r > 0.0)) throw ConfigError("lqr_r", "must be > 0");
        if (eval_runs < 1) throw ConfigError("eval_runs", "must be >= 1");
        if (envelope.height.min < 0.0 || envelope.height.max > atmosphere::kCeiling) {
            throw ConfigError("envelope_height", "outside the atmosphere model range");
        }
    }

    Environment environment() const {
        Environment env;
        env.model = model;
        env.hp = hp;
        env.envelope = envelope;
        env.options = options;
        env.reference = reference;
        return env;
    }
};

namespace detail {

struct ConfigKey {
    std::function<void(ExperimentConfig &, const std::string &)> set;
    std::function<std::string(const ExperimentConfig &)> get;
};

inline double parse_number(const std::string &key, const std::string &v) {
    double x = 0.0;
    if (!textio::parse_double(v, x) || !std::isfinite(x)) {
        throw ConfigError(key, "expected a finite number, got '" + v + "'");
    }
    return x;
}

inline long long parse_integer(const std::string &key, const std::string &v) {
    long long x = 0;
    if (!textio::parse_int(v, x)) throw ConfigError(key, "expected an integer, got '" + v + "'");
    return x;
}

inline bool parse_bool(const std::string &key, const std::string &v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key, "expected true or false, got '" + v + "'");
}

inline std::string show(double v) { return textio::format_short(v); }
inline std::string show(bool v) { return v ? "true" : "false"; }

inline std::map<std::string, ConfigKey> config_keys() {
    using C = ExperimentConfig;
    std::map<std::string, ConfigKey> k;
    const double deg = deg2rad(1.0);

    auto num = [](std::function<double &(C &)> ref, double scale = 1.0) {
        return ConfigKey{[=](C &c, const std::string &v) { ref(c) = parse_number("", v) * scale; },
                         [=](const C &c) { return show(ref(const_cast<C &>(c)) / scale); }};
    };
    auto integer = [](std::function<long long(const C &)> get,
                      std::function<void(C &, long long)> set) {
        return ConfigKey{[=](C &c, const std::string &v) { set(c, parse_integer("", v)); },
                         [=](const C &c) { return std::to_string(get(c)); }};
    };
    auto flag = [](std::function<bool &(C &)> ref) {
        return ConfigKey{[=](C &c, const std::string &v) { ref(c) = parse_bool("", v); },
                         [=](const C &c) { return show(ref(const_cast<C &>(c))); }};
    };

    k["seed"] = ConfigKey{[](C &c, const std::string &v) {
                              std::uint64_t s = 0;
                              if (!textio::parse_int(v, s)) throw ConfigError("", "expected an unsigned integer");
                              c.seed = s;
                          },
                          [](const C &c) { return std::to_string(c.seed); }};
    k["eval_runs"] = integer([](const C &c) { return c.eval_runs; },
                             [](C &c, long long v) { c.eval_runs = static_cast<int>(v); });

    // Training
    k["max_episodes"] = integer([](const C &c) { return c.hp.max_episodes; },
                                [](C &c, long long v) { c.hp.max_episodes = static_cast<int>(v); });
    k["max_steps"] = integer([](const C &c) { return c.hp.max_steps; },
                             [](C &c, long long v) { c.hp.max_steps = static_cast<int>(v); });
    k["actor_lr"] = num([](C &c) -> double & { return c.hp.actor_lr; });
    k["critic_lr"] = num([](C &c) -> double & { return c.hp.critic_lr; });
    k["l2"] = num([](C &c) -> double & { return c.hp.l2; });
    k["clip"] = num([](C &c) -> double & { return c.hp.clip; });
    k["discount"] = num([](C &c) -> double & { return c.hp.discount; });
    k["sample_time"] = num([](C &c) -> double & { return c.hp.sample_time; });
    k["buffer_capacity"] = integer(
        [](const C &c) { return static_cast<long long>(c.hp.buffer_capacity); },
        [](C &c, long long v) {
            if (v < 1) throw ConfigError("", "must be >= 1");
            c.hp.buffer_capacity = static_cast<std::size_t>(v);
        });
    k["batch_size"] = integer(
        [](const C &c) { return static_cast<long long>(c.hp.batch_size); },
        [](C &c, long long v) {
            if (v < 1) throw ConfigError("", "must be >= 1");
            c.hp.batch_size = static_cast<std::size_t>(v);
        });
    k["noise_mean"] = num([](C &c) -> double & { return c.hp.noise_mean; });
    k["noise_sigma"] = num([](C &c) -> double & { return c.hp.noise_sigma; });
    k["noise_decay"] = num([](C &c) -> double & { return c.hp.noise_decay; });
    k["noise_attraction"] = num([](C &c) -> double & { return c.hp.noise_attraction; });
    k["tau"] = num([](C &c) -> double & { return c.hp.tau; });
    k["hidden_layers"] = ConfigKey{
        [](C &c, const std::string &v) {
            c.hp.hidden.clear();
            for (const auto &part : textio::split(v, ',')) {
                c.hp.hidden.push_back(static_cast<int>(parse_integer("", part)));
            }
        },
        [](const C &c) {
            std::string s;
            for (std::size_t i = 0; i < c.hp.hidden.size(); ++i) {
                if (i) s += ',';
                s += std::to_string(c.hp.hidden[i]);
            }
            return s;
        }};

    // Reward and scaling
    k["reward_k_a"] = num([](C &c) -> double & { return c.hp.reward.k_a; });
    k["reward_k_delta"] = num([](C &c) -> double & { return c.hp.reward.k_delta; });
    k["reward_a_z_max"] = num([](C &c) -> double & { return c.hp.reward.a_z_max; });
    k["reward_delta_dot_max"] = num([](C &c) -> double & { return c.hp.reward.delta_dot_max; });
    k["norm_alpha_deg"] = num([](C &c) -> double & { return c.hp.observation.alpha; }, deg);
    k["norm_mach"] = num([](C &c) -> double & { return c.hp.observation.mach; });
    k["norm_height"] = num([](C &c) -> double & { return c.hp.observation.height; });
    k["gain_max_k_dc"] = num([](C &c) -> double & { return c.hp.gain_limits.k_dc; });
    k["gain_max_k_a"] = num([](C &c) -> double & { return c.hp.gain_limits.k_a; });
    k["gain_max_k_i"] = num([](C &c) -> double & { return c.hp.gain_limits.k_i; });
    k["gain_max_k_g"] = num([](C &c) -> double & { return c.hp.gain_limits.k_g; });

    // Episode
    k["envelope_alpha_min_deg"] = num([](C &c) -> double & { return c.envelope.alpha.min; }, deg);
    k["envelope_alpha_max_deg"] = num([](C &c) -> double & { return c.envelope.alpha.max; }, deg);
    k["envelope_mach_min"] = num([](C &c) -> double & { return c.envelope.mach.min; });
    k["envelope_mach_max"] = num([](C &c) -> double & { return c.envelope.mach.max; });
    k["envelope_height_min"] = num([](C &c) -> double & { return c.envelope.height.min; });
    k["envelope_height_max"] = num([](C &c) -> double & { return c.envelope.height.max; });
    k["command"] = num([](C &c) -> double & { return c.options.command; });
    k["shaped_reward"] = flag([](C &c) -> bool & { return c.options.shaped_reward; });
    k["normalize"] = flag([](C &c) -> bool & { return c.options.normalize; });
    k["action_mode"] = ConfigKey{
        [](C &c, const std::string &v) {
            if (v == "gains") {
                c.options.action_mode = ActionMode::gains;
            } else if (v == "direct_fin") {
                c.options.action_mode = ActionMode::direct_fin;
            } else {
                throw ConfigError("", "expected gains or direct_fin, got '" + v + "'");
            }
        },
        [](const C &c) {
            return std::string(c.options.action_mode == ActionMode::gains ? "gains" : "direct_fin");
        }};
    k["direct_fin_scale_deg"] = num([](C &c) -> double & { return c.options.direct_fin_scale; }, deg);
    k["diverge_alpha_deg"] = num([](C &c) -> double & { return c.options.bounds.alpha; }, deg);
    k["diverge_q"] = num([](C &c) -> double & { return c.options.bounds.q; });
    k["diverge_height_min"] = num([](C &c) -> double & { return c.options.bounds.height_min; });

    // Airframe
    k["moment_of_inertia"] = num([](C &c) -> double & { return c.model.physical.moment_of_inertia; });
    k["reference_area"] = num([](C &c) -> double & { return c.model.physical.reference_area; });
    k["reference_distance"] = num([](C &c) -> double & { return c.model.physical.reference_distance; });
    k["mass"] = num([](C &c) -> double & { return c.model.physical.mass; });
    k["gravity"] = num([](C &c) -> double & { return c.model.physical.gravity; });
    k["aero_a_a"] = num([](C &c) -> double & { return c.model.aero.a_a; });
    k["aero_a_n"] = num([](C &c) -> double & { return c.model.aero.a_n; });
    k["aero_b_n"] = num([](C &c) -> double & { return c.model.aero.b_n; });
    k["aero_c_n"] = num([](C &c) -> double & { return c.model.aero.c_n; });
    k["aero_d_n"] = num([](C &c) -> double & { return c.model.aero.d_n; });
    k["aero_a_m"] = num([](C &c) -> double & { return c.model.aero.a_m; });
    k["aero_b_m"] = num([](C &c) -> double & { return c.model.aero.b_m; });
    k["aero_c_m"] = num([](C &c) -> double & { return c.model.aero.c_m; });
    k["aero_d_m"] = num([](C &c) -> double & { return c.model.aero.d_m; });
    k["actuator_damping"] = num([](C &c) -> double & { return c.model.actuator.damping_ratio; });
    k["actuator_frequency"] = num([](C &c) -> double & { return c.model.actuator.natural_frequency; });
    k["fin_limit_deg"] = ConfigKey{
        [](C &c, const std::string &v) {
            if (v == "none") {
                c.model.fin_limit.reset();
            } else {
                c.model.fin_limit = deg2rad(parse_number("", v));
            }
        },
        [](const C &c) {
            return c.model.fin_limit ? show(rad2deg(*c.model.fin_limit)) : std::string("none");
        }};
    k["substeps"] = integer([](const C &c) { return c.model.substeps; },
                            [](C &c, long long v) { c.model.substeps = static_cast<int>(v); });
    k["reference_b1"] = num([](C &c) -> double & { return c.reference.b1; });
    k["reference_a2"] = num([](C &c) -> double & { return c.reference.a2; });
    k["reference_a1"] = num([](C &c) -> double & { return c.reference.a1; });

    // Baseline design
    k["grid_alpha"] = integer([](const C &c) { return c.grid.n_alpha; },
                              [](C &c, long long v) { c.grid.n_alpha = static_cast<int>(v); });
    k["grid_mach"] = integer([](const C &c) { return c.grid.n_mach; },
                             [](C &c, long long v) { c.grid.n_mach = static_cast<int>(v); });
    k["grid_height"] = integer([](const C &c) { return c.grid.n_height; },
                               [](C &c, long long v) { c.grid.n_height = static_cast<int>(v); });
    k["lqr_q_integral"] = num([](C &c) -> double & { return c.lqr.q_integral; });
    k["lqr_q_alpha"] = num([](C &c) -> double & { return c.lqr.q_alpha; });
    k["lqr_q_rate"] = num([](C &c) -> double & { return c.lqr.q_rate; });
    k["lqr_r"] = num([](C &c) -> double & { return c.lqr.r; });
    k["lqr_authority_scaling"] = flag([](C &c) -> bool & { return c.lqr.authority_scaling; });
    return k;
}

} // namespace detail

/// Applies one key. Errors name the key.
inline void set_config_value(ExperimentConfig &c, const std::string &key, const std::string &value) {
    static const auto keys = detail::config_keys();
    const auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError(key, "unknown configuration key");
    try {
        it->second.set(c, value);
    } catch (const ConfigError &e) {
        throw ConfigError(key, e.detail());
    }
}

/// Parses a config file on top of `base`. Does not validate.
inline ExperimentConfig parse_config(std::istream &in, const std::string &source,
                                     ExperimentConfig base = {}) {
    std::string line;
    std::size_t n = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++n;
        const auto hash = line.find('#');
        const std::string_view body = textio::trim(std::string_view(line).substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw ParseError(source, n, "expected 'key = value'");
        const std::string key(textio::trim(body.substr(0, eq)));
        const std::string value(textio::trim(body.substr(eq + 1)));
        if (key.empty()) throw ParseError(source, n, "missing key");
        if (value.empty()) throw ConfigError(key, "missing value (" + source + ":" + std::to_string(n) + ")");
        if (auto [it, fresh] = seen.emplace(key, n); !fresh) {
            throw ConfigError(key, "duplicate key (" + source + ":" + std::to_string(n) +
                                       ", first at line " + std::to_string(it->second) + ")");
        }
        set_config_value(base, key, value);
    }
    return base;
}

/// Every key with its current value, sorted by key; parses back to the same config.
inline std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig &c) {
    static const auto keys = detail::config_keys();
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto &[name, key] : keys) out.emplace_back(name, key.get(c));
    return out;
}

inline void write_config(std::ostream &out, const ExperimentConfig &c) {
    for (const auto &[k, v] : config_entries(c)) out << k << " = " << v << '\n';
}

} // namespace flightrl
