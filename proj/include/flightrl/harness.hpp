// Experiment commands behind the command line tool: train, baseline, eval, compare.
// Every command writes schema-versioned CSV plus a JSON manifest into its output directory.
#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

#include "flightrl/config.hpp"
#include "flightrl/csv.hpp"
#include "flightrl/ddpg.hpp"
#include "flightrl/env.hpp"
#include "flightrl/error.hpp"
#include "flightrl/schedule.hpp"
#include "flightrl/svg.hpp"
#include "flightrl/textio.hpp"
#include "flightrl/training.hpp"

namespace flightrl::harness {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

inline constexpr const char *kManifestSchema = "flightrl manifest v1";

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

/// Object id git would give `contents` as a blob: sha1("blob <size>\0" + contents).
inline std::string git_blob_sha1(std::string_view contents) {
    const std::string header = "blob " + std::to_string(contents.size()) + '\0';
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX *ctx = EVP_MD_CTX_new();
    if (!ctx) throw Error("git_blob_sha1: cannot allocate digest context");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                    EVP_DigestUpdate(ctx, contents.data(), contents.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, md, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw Error("git_blob_sha1: digest failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    }
    return hex.str();
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

/// One initial-condition axis: a fixed value or a uniform draw over the envelope.
struct AxisChoice {
    bool random = true;
    double value = 0.0;
};

enum class StartMode { level, trim };

struct Scenario {
    AxisChoice alpha;   // rad
    AxisChoice mach;
    AxisChoice height;  // m
    double command = 100.0;
    bool shaped_reward = true;
    StartMode start = StartMode::level;
    std::optional<std::uint64_t> seed;
};

/// Key-value text, `#` comments:
///   alpha_deg = random | <deg>     mach = random | <M>      height = random | <m>
///   command = <m/s^2>              shaped_reward = true|false
///   start = level | trim           seed = <u64>
/// With start = trim the angle of attack comes from level trim and alpha_deg must be absent.
inline Scenario parse_scenario(std::istream &in, const std::string &source,
                               double default_command = 100.0) {
    Scenario s;
    s.command = default_command;
    bool alpha_given = false;
    std::string line;
    std::size_t n = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++n;
        const std::string_view body =
            textio::trim(std::string_view(line).substr(0, line.find('#')));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw ParseError(source, n, "expected 'key = value'");
        const std::string key(textio::trim(body.substr(0, eq)));
        const std::string value(textio::trim(body.substr(eq + 1)));
        if (!seen.emplace(key, n).second) throw ParseError(source, n, "duplicate key '" + key + "'");

        auto number = [&]() {
            double v = 0.0;
            if (!textio::parse_double(value, v) || !std::isfinite(v)) {
                throw ParseError(source, n, key + ": invalid number '" + value + "'");
            }
            return v;
        };
        auto axis = [&](double scale) {
            if (value == "random") return AxisChoice{};
            return AxisChoice{false, number() * scale};
        };

        if (key == "alpha_deg") {
            s.alpha = axis(deg2rad(1.0));
            alpha_given = true;
        } else if (key == "mach") {
            s.mach = axis(1.0);
        } else if (key == "height") {
            s.height = axis(1.0);
        } else if (key == "command") {
            s.command = number();
        } else if (key == "shaped_reward") {
            if (value != "true" && value != "false") {
                throw ParseError(source, n, "shaped_reward: expected true or false");
            }
            s.shaped_reward = value == "true";
        } else if (key == "start") {
            if (value == "level") {
                s.start = StartMode::level;
            } else if (value == "trim") {
                s.start = StartMode::trim;
            } else {
                throw ParseError(source, n, "start: expected level or trim");
            }
        } else if (key == "seed") {
            std::uint64_t v = 0;
            if (!textio::parse_int(value, v)) throw ParseError(source, n, "seed: invalid integer");
            s.seed = v;
        } else {
            throw ParseError(source, n, "unknown scenario key '" + key + "'");
        }
    }
    if (s.start == StartMode::trim && alpha_given) {
        throw ParseError(source, 0, "alpha_deg cannot be set with start = trim");
    }
    return s;
}

struct InitialCondition {
    double alpha = 0.0;
    double mach = 0.0;
    double height = 0.0;
    double delta = 0.0;
    bool trimmed = false;
};

/// Draws `runs` initial conditions from the scenario stream of `seed`.
inline std::vector<InitialCondition> draw_initial_conditions(const Scenario &s,
                                                             const Environment &env, int runs,
                                                             std::uint64_t seed) {
    auto rng = make_stream(seed, Stream::scenario);
    auto pick = [&](const AxisChoice &a, const Range &r) {
        if (!a.random) return a.value;
        if (r.min == r.max) return r.min;
        return std::uniform_real_distribution<double>(r.min, r.max)(rng);
    };
    std::vector<InitialCondition> out;
    for (int i = 0; i < runs; ++i) {
        InitialCondition ic;
        ic.alpha = pick(s.alpha, env.envelope.alpha);
        ic.mach = pick(s.mach, env.envelope.mach);
        ic.height = pick(s.height, env.envelope.height);
        if (s.start == StartMode::trim) {
            const TrimPoint t = trim(ic.mach, ic.height, env.model.physical, env.model.aero);
            ic.alpha = t.alpha;
            ic.delta = t.delta;
            ic.trimmed = true;
        }
        out.push_back(ic);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV artifacts
// ---------------------------------------------------------------------------

inline const std::vector<std::string> &curve_columns() {
    static const std::vector<std::string> c{"episode", "steps", "episode_reward", "avg_reward_30",
                                            "sigma", "diverged"};
    return c;
}

inline const std::vector<std::string> &trajectory_columns() {
    static const std::vector<std::string> c{
        "t",     "a_zc",  "a_zc_shaped", "a_z",   "alpha",   "q",    "theta", "mach", "height",
        "delta", "delta_dot", "delta_c", "k_dc", "k_a",     "k_i",  "k_g",   "reward"};
    return c;
}

inline const std::vector<std::string> &summary_columns() {
    static const std::vector<std::string> c{
        "run",        "alpha0_deg",        "mach0",         "height0",       "steady_state_error",
        "final_error", "overshoot",        "undershoot",    "max_abs_delta", "max_abs_delta_dot",
        "total_reward", "steps",           "diverged"};
    return c;
}

inline void write_curve(std::ostream &out, const std::vector<CurveRow> &curve) {
    csv::Writer w(out, "curve", curve_columns());
    for (const auto &r : curve) {
        w.row({csv::cell(r.episode), csv::cell(r.steps), csv::cell(r.episode_reward),
               csv::cell(r.avg_reward_30), csv::cell(r.sigma), csv::cell(r.diverged)});
    }
}

inline void write_trajectory(std::ostream &out, const Trajectory &tr) {
    csv::Writer w(out, "trajectory", trajectory_columns());
    for (const auto &r : tr.rows) {
        const SystemState &s = r.state;
        w.row({csv::cell(r.t), csv::cell(r.a_zc), csv::cell(r.a_zc_shaped), csv::cell(r.a_z),
               csv::cell(s.alpha), csv::cell(s.q), csv::cell(s.theta), csv::cell(s.mach),
               csv::cell(s.height), csv::cell(s.delta), csv::cell(s.delta_dot),
               csv::cell(r.delta_c), csv::cell(r.gains.k_dc), csv::cell(r.gains.k_a),
               csv::cell(r.gains.k_i), csv::cell(r.gains.k_g), csv::cell(r.reward)});
    }
}

// ---------------------------------------------------------------------------
// Options and shared plumbing
// ---------------------------------------------------------------------------

struct CommonOptions {
    std::optional<fs::path> config;
    std::optional<std::uint64_t> seed;
    fs::path out = "out";
};

struct TrainOptions : CommonOptions {
    std::optional<int> episodes;
    bool no_shaped_command = false;
    bool from_scratch = false;
    bool no_normalization = false;
    int progress_every = 10;  // episodes between log lines, 0 for none
};

struct EvalOptions : CommonOptions {
    std::optional<fs::path> weights;
    std::optional<fs::path> schedule;
    std::optional<fs::path> scenario;
    std::optional<int> runs;
};

struct CompareOptions {
    std::vector<fs::path> inputs;
    fs::path out = "out";
};

inline ExperimentConfig load_config(const std::optional<fs::path> &path,
                                    const std::optional<std::uint64_t> &seed) {
    ExperimentConfig c;
    if (path) {
        std::istringstream in(textio::read_file(*path));
        c = parse_config(in, path->string());
    }
    if (seed) c.seed = *seed;
    c.validate();
    return c;
}

namespace detail {

inline std::string render(const std::function<void(std::ostream &)> &fn) {
    std::ostringstream ss;
    fn(ss);
    return ss.str();
}

inline Json config_json(const ExperimentConfig &c) {
    Json j = Json::object();
    for (const auto &[k, v] : config_entries(c)) j[k] = v;
    return j;
}

inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json manifest(const std::string &command, const ExperimentConfig &c) {
    Json m;
    m["schema"] = kManifestSchema;
    m["command"] = command;
    m["seed"] = c.seed;
    m["config"] = config_json(c);
    return m;
}

inline void finish_manifest(Json &m, const fs::path &dir,
                            std::chrono::steady_clock::time_point start) {
    m["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    textio::write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

inline svg::Series series(const std::string &label, const std::vector<double> &x,
                          const std::vector<double> &y) {
    return {label, x, y};
}

} // namespace detail

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

inline ExperimentConfig train_config(const TrainOptions &o) {
    ExperimentConfig c = load_config(o.config, o.seed);
    if (o.episodes) {
        if (*o.episodes < 0) throw ConfigError("episodes", "must be >= 0");
        c.hp.max_episodes = *o.episodes;
    }
    if (o.no_shaped_command) c.options.shaped_reward = false;
    if (o.from_scratch) c.options.action_mode = ActionMode::direct_fin;
    if (o.no_normalization) c.options.normalize = false;
    c.validate();
    return c;
}

/// Returns the process exit code: 0, or 3 when training went non-finite (artifacts
/// up to that point are still written).
inline int cmd_train(const TrainOptions &o, std::ostream &log) {
    const auto start = std::chrono::steady_clock::now();
    const ExperimentConfig c = train_config(o);
    const Environment env = c.environment();
    RngStreams rng(c.seed);
    ddpg::Agent agent = make_agent(env, rng.init);

    const int every = o.progress_every;
    TrainResult res = train(env, std::move(agent), rng, c.hp.max_episodes, [&](const CurveRow &r) {
        if (every > 0 && (r.episode + 1) % every == 0) {
            log << "episode " << r.episode + 1 << " reward " << r.episode_reward << " avg30 "
                << r.avg_reward_30 << (r.diverged ? " (diverged)" : "") << '\n';
        }
    });

    fs::create_directories(o.out);
    const std::string curve = detail::render([&](std::ostream &s) { write_curve(s, res.curve); });
    const std::string final_weights =
        detail::render([&](std::ostream &s) { ddpg::write_agent(s, res.agent); });
    const std::string best_weights =
        detail::render([&](std::ostream &s) { ddpg::write_agent(s, res.best_agent); });
    textio::write_file_atomic(o.out / "curve.csv", curve);
    textio::write_file_atomic(o.out / "agent.txt", final_weights);
    textio::write_file_atomic(o.out / "best_agent.txt", best_weights);
    textio::write_file_atomic(o.out / "config.txt",
                              detail::render([&](std::ostream &s) { write_config(s, c); }));

    std::vector<double> ep, reward, avg;
    for (const auto &r : res.curve) {
        ep.push_back(r.episode);
        reward.push_back(r.episode_reward);
        avg.push_back(r.avg_reward_30);
    }
    svg::Chart chart{"Learning curve", "episode", "reward",
                     {detail::series("episode reward", ep, reward),
                      detail::series("30-episode average", ep, avg)}};
    textio::write_file_atomic(o.out / "curve.svg",
                              detail::render([&](std::ostream &s) { svg::write(s, chart); }));

    Json m = detail::manifest("train", c);
    m["weights"] = {{"agent.txt", git_blob_sha1(final_weights)},
                    {"best_agent.txt", git_blob_sha1(best_weights)}};
    Json metrics;
    metrics["episodes"] = res.curve.size();
    metrics["updates"] = res.updates;
    metrics["best_episode"] = res.best_episode;
    metrics["best_episode_reward"] = detail::number(res.best_reward);
    metrics["final_avg_reward_30"] =
        res.curve.empty() ? Json(nullptr) : detail::number(res.curve.back().avg_reward_30);
    metrics["diverged_episodes"] =
        std::count_if(res.curve.begin(), res.curve.end(), [](const CurveRow &r) { return r.diverged; });
    metrics["status"] = res.ok() ? "ok" : "diverged";
    if (!res.ok()) metrics["failure"] = res.failure;
    m["metrics"] = metrics;
    Json episodes = Json::array();
    for (const auto &r : res.curve) episodes.push_back(detail::number(r.episode_reward));
    m["episode_rewards"] = episodes;
    detail::finish_manifest(m, o.out, start);

    if (!res.ok()) {
        log << "training diverged: " << res.failure << '\n';
        return static_cast<int>(ExitCode::kDivergence);
    }
    log << "trained " << res.curve.size() << " episodes, best reward " << res.best_reward
        << " at episode " << res.best_episode << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// baseline
// ---------------------------------------------------------------------------

inline int cmd_baseline(const CommonOptions &o, std::ostream &log) {
    const auto start = std::chrono::steady_clock::now();
    const ExperimentConfig c = load_config(o.config, o.seed);
    const BaselineDesign d =
        design_baseline_gains(c.grid, c.envelope, c.lqr, c.model, c.hp.sample_time);

    fs::create_directories(o.out);
    const std::string schedule =
        detail::render([&](std::ostream &s) { write_schedule(s, d.schedule); });
    textio::write_file_atomic(o.out / "schedule.txt", schedule);

    std::ostringstream nodes;
    csv::Writer w(nodes, "nodes",
                  {"alpha_deg", "mach", "height", "delta_trim", "k_dc", "k_a", "k_i", "k_g",
                   "spectral_abscissa", "sampled_radius", "stable"});
    int unstable = 0;
    for (const auto &n : d.nodes) {
        const double abscissa = lqr::spectral_abscissa(n.loop_poles);
        w.row({csv::cell(rad2deg(n.alpha)), csv::cell(n.mach), csv::cell(n.height),
               csv::cell(n.delta_trim), csv::cell(n.gains.k_dc), csv::cell(n.gains.k_a),
               csv::cell(n.gains.k_i), csv::cell(n.gains.k_g), csv::cell(abscissa),
               csv::cell(n.sampled_radius), csv::cell(n.stable())});
        if (!n.stable()) ++unstable;

        log << node_name(n.alpha, n.mach, n.height) << " poles:";
        for (Eigen::Index i = 0; i < n.loop_poles.size(); ++i) {
            const auto p = n.loop_poles(i);
            log << ' ' << textio::format_short(std::round(p.real() * 1e4) / 1e4);
            if (p.imag() != 0.0) {
                log << (p.imag() < 0 ? '-' : '+') << textio::format_short(std::round(std::abs(p.imag()) * 1e4) / 1e4)
                    << 'i';
            }
        }
        log << " |z|max " << textio::format_short(std::round(n.sampled_radius * 1e4) / 1e4)
            << (n.stable() ? "" : " UNSTABLE") << '\n';
    }
    textio::write_file_atomic(o.out / "nodes.csv", nodes.str());

    Json m = detail::manifest("baseline", c);
    m["weights"] = {{"schedule.txt", git_blob_sha1(schedule)}};
    m["metrics"] = {{"nodes", d.nodes.size()}, {"unstable_nodes", unstable}};
    detail::finish_manifest(m, o.out, start);
    log << d.nodes.size() << " nodes, " << unstable << " unstable\n";
    return unstable == 0 ? 0 : static_cast<int>(ExitCode::kFailure);
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

/// A loaded controller: either a trained agent or a gain schedule.
struct Controller {
    std::optional<ddpg::Agent> agent;
    std::optional<GainSchedule> schedule;

    ActionMode mode() const {
        return agent && agent->action_size() == 1 ? ActionMode::direct_fin : ActionMode::gains;
    }

    Policy policy() const {
        return agent ? agent_policy(*agent) : schedule_policy(*schedule);
    }

    /// Gains the controller would apply in state `ep` (zero for a direct fin agent).
    GainSet gains(const Environment &env, const EpisodeState &ep) const {
        if (schedule) return schedule_gains(*schedule, ep.sys.alpha, ep.sys.mach, ep.sys.height);
        if (mode() == ActionMode::direct_fin) return {};
        const auto choice = ddpg::select_action(*agent, observe(env, ep), nullptr);
        return nn::scale_actor_output(choice.executed, env.hp.gain_limits);
    }
};

inline Controller load_controller(const EvalOptions &o) {
    if (o.weights.has_value() == o.schedule.has_value()) {
        throw ConfigError("eval", "exactly one of --weights or --schedule is required");
    }
    Controller ctl;
    if (o.weights) {
        std::istringstream in(textio::read_file(*o.weights));
        ctl.agent = ddpg::read_agent(in, o.weights->string());
        if (ctl.agent->actor.input_size() != Environment::observation_size()) {
            throw ParseError(o.weights->string(), 0, "actor expects " +
                                                         std::to_string(ctl.agent->actor.input_size()) +
                                                         " observations, environment provides 3");
        }
        const int a = ctl.agent->action_size();
        if (a != 4 && a != 1) {
            throw ParseError(o.weights->string(), 0, "actor has " + std::to_string(a) +
                                                         " outputs, expected 4 (gains) or 1 (fin)");
        }
    } else {
        std::istringstream in(textio::read_file(*o.schedule));
        ctl.schedule = read_schedule(in, o.schedule->string());
    }
    return ctl;
}

/// Without --config, an agent is evaluated under the config.txt saved beside its weights.
inline ExperimentConfig eval_config(const EvalOptions &o) {
    std::optional<fs::path> path = o.config;
    if (!path && o.weights) {
        const fs::path sibling = o.weights->parent_path() / "config.txt";
        if (fs::exists(sibling)) path = sibling;
    }
    ExperimentConfig c = load_config(path, o.seed);
    if (o.runs) {
        if (*o.runs < 1) throw ConfigError("runs", "must be >= 1");
        c.eval_runs = *o.runs;
    }
    return c;
}

struct EvalRun {
    InitialCondition initial;
    Trajectory trajectory;
    RunSummary summary;
};

/// Noise-free rollouts of `ctl` from the scenario's initial conditions.
inline std::vector<EvalRun> evaluate(const Controller &ctl, Environment env, const Scenario &sc,
                                     int runs, std::uint64_t seed) {
    env.options.command = sc.command;
    env.options.shaped_reward = sc.shaped_reward;
    env.options.action_mode = ctl.mode();
    const Policy policy = ctl.policy();
    std::vector<EvalRun> out;
    for (const auto &ic : draw_initial_conditions(sc, env, runs, seed)) {
        EpisodeState ep = make_episode(env, ic.alpha, ic.mach, ic.height);
        if (ic.trimmed) {
            start_at_trim(env, ep, {ic.alpha, ic.delta}, ctl.gains(env, ep));
        }
        EvalRun run;
        run.initial = ic;
        run.trajectory = rollout(env, ep, policy);
        run.summary = summarize(run.trajectory, env.hp.sample_time);
        out.push_back(std::move(run));
    }
    return out;
}

inline void write_summary(std::ostream &out, const std::vector<EvalRun> &runs) {
    csv::Writer w(out, "summary", summary_columns());
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto &r = runs[i];
        const auto &s = r.summary;
        w.row({csv::cell(static_cast<int>(i)), csv::cell(rad2deg(r.initial.alpha)),
               csv::cell(r.initial.mach), csv::cell(r.initial.height),
               csv::cell(s.steady_state_error), csv::cell(s.final_error), csv::cell(s.overshoot),
               csv::cell(s.undershoot), csv::cell(s.max_abs_delta), csv::cell(s.max_abs_delta_dot),
               csv::cell(s.total_reward), csv::cell(s.steps), csv::cell(s.diverged)});
    }
}

inline std::string run_file(std::size_t i) {
    std::ostringstream ss;
    ss << "run_" << std::setw(3) << std::setfill('0') << i << ".csv";
    return ss.str();
}

inline int cmd_eval(const EvalOptions &o, std::ostream &log) {
    const auto start = std::chrono::steady_clock::now();
    const Controller ctl = load_controller(o);
    const ExperimentConfig c = eval_config(o);
    Scenario sc;
    sc.command = c.options.command;
    sc.shaped_reward = c.options.shaped_reward;
    if (o.scenario) {
        std::istringstream in(textio::read_file(*o.scenario));
        sc = parse_scenario(in, o.scenario->string(), c.options.command);
    }
    // --seed beats the scenario's own seed, which beats the config seed
    const std::uint64_t seed = o.seed ? *o.seed : sc.seed.value_or(c.seed);
    const auto runs = evaluate(ctl, c.environment(), sc, c.eval_runs, seed);

    fs::create_directories(o.out);
    svg::Chart chart{"Acceleration response", "t [s]", "a_z [m/s^2]", {}};
    for (std::size_t i = 0; i < runs.size(); ++i) {
        textio::write_file_atomic(o.out / run_file(i), detail::render([&](std::ostream &s) {
                                      write_trajectory(s, runs[i].trajectory);
                                  }));
        if (i < 6) {
            std::vector<double> t, a;
            for (const auto &r : runs[i].trajectory.rows) {
                t.push_back(r.t);
                a.push_back(r.a_z);
            }
            chart.series.push_back(detail::series("run " + std::to_string(i), t, a));
        }
    }
    if (!runs.empty()) {
        std::vector<double> t, ref;
        for (const auto &r : runs[0].trajectory.rows) {
            t.push_back(r.t);
            ref.push_back(r.a_zc_shaped);
        }
        chart.series.push_back(detail::series("shaped command", t, ref));
    }
    textio::write_file_atomic(o.out / "summary.csv",
                              detail::render([&](std::ostream &s) { write_summary(s, runs); }));
    textio::write_file_atomic(o.out / "response.svg",
                              detail::render([&](std::ostream &s) { svg::write(s, chart); }));

    Json m = detail::manifest("eval", c);
    m["seed"] = seed;
    m["controller"] = ctl.agent ? "agent" : "schedule";
    const fs::path &source = ctl.agent ? *o.weights : *o.schedule;
    m["weights"] = {{source.filename().string(), git_blob_sha1(textio::read_file(source))}};
    double sse = 0.0;
    int diverged = 0;
    Json per_run = Json::array();
    for (const auto &r : runs) {
        sse += r.summary.steady_state_error;
        diverged += r.summary.diverged ? 1 : 0;
        per_run.push_back({{"steady_state_error", detail::number(r.summary.steady_state_error)},
                           {"total_reward", detail::number(r.summary.total_reward)},
                           {"diverged", r.summary.diverged}});
    }
    m["metrics"] = {{"runs", runs.size()},
                    {"mean_steady_state_error", detail::number(sse / static_cast<double>(runs.size()))},
                    {"diverged_runs", diverged}};
    m["runs"] = per_run;
    detail::finish_manifest(m, o.out, start);

    log << runs.size() << " runs, mean steady-state error "
        << textio::format_short(sse / static_cast<double>(runs.size())) << " m/s^2, " << diverged
        << " diverged\n";
    return 0;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

/// A directory stands for the curve.csv (training run) or summary.csv (evaluation) in it.
inline fs::path resolve_input(const fs::path &p) {
    if (!fs::is_directory(p)) return p;
    for (const char *name : {"curve.csv", "summary.csv"}) {
        if (fs::exists(p / name)) return p / name;
    }
    throw IoError(p.string() + ": no curve.csv or summary.csv in directory");
}

inline std::string input_label(const fs::path &given) {
    std::string s = given.lexically_normal().string();
    while (s.size() > 1 && s.back() == '/') s.pop_back();
    return s;
}

inline int cmd_compare(const CompareOptions &o, std::ostream &log) {
    if (o.inputs.empty()) throw ConfigError("compare", "at least one run is required");
    std::vector<csv::Table> tables;
    std::vector<std::string> labels;
    for (const auto &given : o.inputs) {
        const fs::path p = resolve_input(given);
        std::istringstream in(textio::read_file(p));
        tables.push_back(csv::read(in, p.string()));
        labels.push_back(input_label(given));
        const auto &first = tables.front();
        const auto &t = tables.back();
        if (t.kind != first.kind || t.columns != first.columns) {
            throw ParseError(p.string(), 1, "schema '" + t.kind + "' does not match '" + first.kind +
                                                "' of " + labels.front());
        }
    }
    const std::string kind = tables.front().kind;

    fs::create_directories(o.out);
    std::ostringstream combined;
    {
        std::vector<std::string> cols{"run"};
        cols.insert(cols.end(), tables.front().columns.begin(), tables.front().columns.end());
        csv::Writer w(combined, kind + "_combined", cols);
        for (std::size_t k = 0; k < tables.size(); ++k) {
            for (const auto &row : tables[k].rows) {
                std::vector<std::string> cells{labels[k]};
                cells.insert(cells.end(), row.begin(), row.end());
                w.row(cells);
            }
        }
    }
    textio::write_file_atomic(o.out / "combined.csv", combined.str());

    std::ostringstream summary;
    svg::Chart chart;
    if (kind == "curve") {
        csv::Writer w(summary, "compare_curve",
                      {"run", "episodes", "best_episode", "best_episode_reward",
                       "first_avg_reward_30", "final_avg_reward_30"});
        chart = {"Learning curves", "episode", "30-episode average reward", {}};
        for (std::size_t k = 0; k < tables.size(); ++k) {
            const auto ep = tables[k].numbers("episode");
            const auto reward = tables[k].numbers("episode_reward");
            const auto avg = tables[k].numbers("avg_reward_30");
            std::size_t best = 0;
            for (std::size_t i = 1; i < reward.size(); ++i) {
                if (reward[i] > reward[best]) best = i;
            }
            const std::size_t first = std::min<std::size_t>(kAverageWindow, avg.size());
            w.row({labels[k], csv::cell(static_cast<int>(reward.size())),
                   reward.empty() ? "" : csv::cell(static_cast<int>(ep[best])),
                   reward.empty() ? "" : csv::cell(reward[best]),
                   avg.empty() ? "" : csv::cell(avg[first - 1]),
                   avg.empty() ? "" : csv::cell(avg.back())});
            chart.series.push_back(detail::series(labels[k], ep, avg));
        }
    } else if (kind == "summary") {
        csv::Writer w(summary, "compare_summary",
                      {"run", "runs", "mean_steady_state_error", "max_steady_state_error",
                       "mean_total_reward", "diverged_runs"});
        chart = {"Steady-state error per run", "run", "mean |a_z - shaped command| [m/s^2]", {}};
        for (std::size_t k = 0; k < tables.size(); ++k) {
            const auto idx = tables[k].numbers("run");
            const auto sse = tables[k].numbers("steady_state_error");
            const auto reward = tables[k].numbers("total_reward");
            const auto div = tables[k].numbers("diverged");
            const double n = static_cast<double>(sse.size());
            double sum = 0.0, peak = 0.0, rsum = 0.0, dsum = 0.0;
            for (std::size_t i = 0; i < sse.size(); ++i) {
                sum += sse[i];
                peak = std::max(peak, sse[i]);
                rsum += reward[i];
                dsum += div[i];
            }
            w.row({labels[k], csv::cell(static_cast<int>(sse.size())),
                   sse.empty() ? "" : csv::cell(sum / n), csv::cell(peak),
                   sse.empty() ? "" : csv::cell(rsum / n), csv::cell(static_cast<int>(dsum))});
            chart.series.push_back(detail::series(labels[k], idx, sse));
        }
    } else if (kind == "trajectory") {
        csv::Writer w(summary, "compare_trajectory",
                      {"run", "steps", "final_error", "max_abs_delta", "total_reward"});
        chart = {"Acceleration response", "t [s]", "a_z [m/s^2]", {}};
        for (std::size_t k = 0; k < tables.size(); ++k) {
            const auto t = tables[k].numbers("t");
            const auto az = tables[k].numbers("a_z");
            const auto cmd = tables[k].numbers("a_zc");
            const auto delta = tables[k].numbers("delta");
            const auto reward = tables[k].numbers("reward");
            double dmax = 0.0, rsum = 0.0;
            for (std::size_t i = 0; i < t.size(); ++i) {
                dmax = std::max(dmax, std::abs(delta[i]));
                rsum += reward[i];
            }
            w.row({labels[k], csv::cell(static_cast<int>(t.size())),
                   t.empty() ? "" : csv::cell(std::abs(az.back() - cmd.back())), csv::cell(dmax),
                   csv::cell(rsum)});
            chart.series.push_back(detail::series(labels[k], t, az));
        }
    } else {
        throw ParseError(labels.front(), 1, "cannot compare files of kind '" + kind + "'");
    }
    textio::write_file_atomic(o.out / "summary.csv", summary.str());
    textio::write_file_atomic(o.out / "compare.svg",
                              detail::render([&](std::ostream &s) { svg::write(s, chart); }));
    log << "compared " << tables.size() << ' ' << kind << " file(s)\n";
    return 0;
}

} // namespace flightrl::harness
