// flightrl: train, baseline, eval and compare from the command line.
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "flightrl/harness.hpp"

namespace {

using flightrl::ExitCode;
namespace harness = flightrl::harness;

void add_common(CLI::App *cmd, harness::CommonOptions &o) {
    cmd->add_option("--config", o.config, "Experiment config file (key = value)");
    cmd->add_option("--seed", o.seed, "Global seed, overrides the config");
    cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Three-loop autopilot gains by deep reinforcement learning"};
    app.require_subcommand(1);

    harness::TrainOptions train;
    auto *train_cmd = app.add_subcommand("train", "Train a DDPG agent");
    add_common(train_cmd, train);
    train_cmd->add_option("--episodes", train.episodes, "Episodes, overrides max_episodes");
    train_cmd->add_flag("--no-shaped-command", train.no_shaped_command,
                        "Score against the raw step instead of the shaped command");
    train_cmd->add_flag("--from-scratch", train.from_scratch,
                        "Learn the fin command directly instead of autopilot gains");
    train_cmd->add_flag("--no-normalization", train.no_normalization,
                        "Feed raw (alpha, M, h) observations to the networks");
    train_cmd->add_option("--progress", train.progress_every,
                          "Episodes between progress lines, 0 to silence")
        ->capture_default_str();

    harness::CommonOptions baseline;
    auto *baseline_cmd = app.add_subcommand("baseline", "Design the LQR gain schedule");
    add_common(baseline_cmd, baseline);

    harness::EvalOptions eval;
    auto *eval_cmd = app.add_subcommand("eval", "Noise-free rollouts of an agent or schedule");
    add_common(eval_cmd, eval);
    auto *weights = eval_cmd->add_option("--weights", eval.weights, "Agent file from train");
    auto *schedule = eval_cmd->add_option("--schedule", eval.schedule, "Schedule file from baseline");
    weights->excludes(schedule);
    eval_cmd->add_option("--scenario", eval.scenario, "Scenario file");
    eval_cmd->add_option("--runs", eval.runs, "Number of rollouts, overrides eval_runs");

    harness::CompareOptions compare;
    auto *compare_cmd = app.add_subcommand("compare", "Combine curves or summaries of several runs");
    compare_cmd->add_option("runs", compare.inputs, "Run directories or CSV files")->required();
    compare_cmd->add_option("--out", compare.out, "Output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
    }

    try {
        if (*train_cmd) return harness::cmd_train(train, std::cout);
        if (*baseline_cmd) return harness::cmd_baseline(baseline, std::cout);
        if (*eval_cmd) return harness::cmd_eval(eval, std::cout);
        if (*compare_cmd) return harness::cmd_compare(compare, std::cout);
    } catch (const flightrl::Error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.code());
    } catch (const std::filesystem::filesystem_error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::kParse);
    } catch (const std::exception &e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::kFailure);
    }
    return static_cast<int>(ExitCode::kFailure);
}
