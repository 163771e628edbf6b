#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"

#include "flightrl/ddpg.hpp"
#include "flightrl/training.hpp"

using namespace flightrl;
using namespace flightrl::ddpg;
using doctest::Approx;

namespace {

Transition item(double r) {
    return {Eigen::VectorXd::Constant(1, r), Eigen::VectorXd::Zero(1), -r, Eigen::VectorXd::Zero(1),
            false};
}

std::vector<Transition> random_transitions(int n, int obs, int act, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Transition> out;
    for (int i = 0; i < n; ++i) {
        Transition t;
        t.observation = Eigen::VectorXd(obs);
        t.next_observation = Eigen::VectorXd(obs);
        t.action = Eigen::VectorXd(act);
        for (int k = 0; k < obs; ++k) {
            t.observation(k) = u(rng);
            t.next_observation(k) = u(rng);
        }
        for (int k = 0; k < act; ++k) t.action(k) = u(rng);
        t.reward = -std::abs(u(rng));
        out.push_back(t);
    }
    return out;
}

std::vector<const Transition *> pointers(const std::vector<Transition> &v) {
    std::vector<const Transition *> p;
    for (const auto &t : v) p.push_back(&t);
    return p;
}

HyperParameters small_lr(double lr) {
    HyperParameters hp;
    hp.actor_lr = lr;
    hp.critic_lr = lr;
    hp.l2 = 0.0;
    return hp;
}

} // namespace

TEST_CASE("replay buffer FIFO") {
    ReplayBuffer b(3);
    b.push(item(1));
    CHECK(b.size() == 1);
    for (int i = 2; i <= 4; ++i) b.push(item(i));
    CHECK(b.size() == 3);
    CHECK(b.at(0).observation(0) == 2);
    CHECK(b.at(1).observation(0) == 3);
    CHECK(b.at(2).observation(0) == 4);

    ReplayBuffer big(1000);
    for (int i = 0; i < 1000000; ++i) {
        big.push(item(i));
        if (big.size() > big.capacity()) FAIL("size exceeded capacity");
    }
    CHECK(big.at(0).observation(0) == 999000);
    CHECK(big.at(999).observation(0) == 999999);
}

TEST_CASE("replay buffer sampling") {
    ReplayBuffer one(10);
    std::mt19937_64 rng(1);
    CHECK_FALSE(one.sample(1, rng).has_value());
    one.push(item(7));
    const auto s = one.sample(1, rng);
    REQUIRE(s.has_value());
    CHECK((*s)[0]->observation(0) == 7);

    ReplayBuffer b(100);
    for (int i = 0; i < 100; ++i) b.push(item(i));

    // uniform over slots: chi-square with 99 dof, 0.999 quantile is about 148
    std::vector<int> counts(100, 0);
    std::mt19937_64 u(17);
    for (int k = 0; k < 1000; ++k) {
        const auto idx = b.sample_indices(100, u);
        for (std::size_t i : *idx) ++counts[i];
    }
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
    CHECK(chi2 < 148.0);

    std::mt19937_64 r1(42), r2(42);
    CHECK(*b.sample_indices(64, r1) == *b.sample_indices(64, r2));
}

TEST_CASE("OU noise") {
    OuNoise n;
    n.value = Eigen::VectorXd::Constant(4, 0.0);
    n.sigma = 0.0;
    std::mt19937_64 rng(2);
    for (int i = 0; i < 100; ++i) CHECK(ou_step(n, rng).isZero());

    n.value = Eigen::VectorXd::Ones(4);
    CHECK(ou_step(n, rng)(0) == Approx(0.9985).epsilon(1e-15));

    HyperParameters hp;
    OuNoise d = make_noise(4, hp);
    ou_step(d, rng);
    CHECK(d.sigma == Approx(0.0999999).epsilon(1e-12));

    // long-run mean within 3 standard errors of mu with a constant variance
    OuNoise m;
    m.value = Eigen::VectorXd::Constant(1, 0.5);
    m.mean = 0.5;
    m.decay = 0.0;
    double sum = 0.0;
    const int steps = 1000000;
    for (int i = 0; i < steps; ++i) sum += ou_step(m, rng)(0);
    // stationary sd sqrt(sigma / (2 beta)); samples are correlated over ~1/(beta dt) steps
    const double sd = std::sqrt(m.sigma / (2.0 * m.attraction));
    const double effective = steps * m.attraction * m.dt / 2.0;
    CHECK(std::abs(sum / steps - 0.5) < 3.0 * sd / std::sqrt(effective));
}

TEST_CASE("action selection") {
    std::mt19937_64 rng(3);
    Agent a = make_agent(3, 4, {8, 8}, rng);
    const Eigen::VectorXd o = Eigen::Vector3d(0.1, 0.7, 0.6);
    const auto quiet = select_action(a, o, nullptr);
    CHECK(quiet.executed == quiet.raw);

    Agent z = a;
    z.actor = nn::zeros_like(a.actor);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
    CHECK(select_action(z, o, &zero).executed.isZero());

    z.actor.layers.back().biases.setConstant(std::atanh(0.95));
    const Eigen::VectorXd push = Eigen::VectorXd::Constant(4, 0.2);
    const auto c = select_action(z, o, &push);
    CHECK(c.raw(0) == Approx(0.95));
    CHECK(c.executed(0) == 1.0);
}

TEST_CASE("targets start as copies") {
    std::mt19937_64 rng(4);
    const Agent a = make_agent(3, 4, {16, 16}, rng);
    CHECK(a.target_actor == a.actor);
    CHECK(a.target_critic == a.critic);
    CHECK(a.critic.input_size() == 7);
}

TEST_CASE("TD error") {
    std::mt19937_64 rng(5);
    Agent a = make_agent(3, 2, {8}, rng);
    const auto ts = random_transitions(5, 3, 2, 6);
    for (const auto &t : ts) {
        // two independent forward passes
        Eigen::VectorXd in(5), next_in(5);
        in << t.observation, t.action;
        next_in << t.next_observation, nn::forward(a.target_actor, t.next_observation);
        const double q = nn::forward(a.critic, in)(0);
        const double q_next = nn::forward(a.target_critic, next_in)(0);
        CHECK(td_error(a, t, 0.99) == Approx(t.reward + 0.99 * q_next - q).epsilon(1e-14));
        CHECK(td_error(a, t, 0.0) == Approx(t.reward - q).epsilon(1e-14));
    }
    a.critic = nn::zeros_like(a.critic);
    a.target_critic = nn::zeros_like(a.critic);
    CHECK(td_error(a, ts[0], 0.99) == ts[0].reward);
}

TEST_CASE("critic update") {
    std::mt19937_64 rng(7);
    Agent a = make_agent(3, 2, {8, 8}, rng);
    const auto ts = random_transitions(16, 3, 2, 8);
    const auto batch = pointers(ts);
    const double before = critic_loss(a, batch, 0.99);
    Agent b = a;
    const double reported = critic_update(b, batch, small_lr(1e-6));
    CHECK(reported == Approx(before).epsilon(1e-14));
    CHECK(critic_loss(b, batch, 0.99) < before);
    CHECK(b.actor == a.actor);
    CHECK(b.target_critic == a.target_critic);

    // zero TD errors and no L2: nothing moves
    Agent z = a;
    z.critic = nn::zeros_like(a.critic);
    z.target_critic = z.critic;
    std::vector<Transition> flat = ts;
    for (auto &t : flat) t.reward = 0.0;
    const Agent z0 = z;
    critic_update(z, pointers(flat), small_lr(1e-3));
    CHECK(z.critic == z0.critic);
}

TEST_CASE("critic update on a one-parameter critic") {
    // Q(s, a) = w a, target critic zero: loss (w a - r)^2, gradient 2 a (w a - r)
    Agent a;
    a.actor.layers.push_back({Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1), nn::Activation::tanh});
    a.critic.layers.push_back({Eigen::MatrixXd(1, 2), Eigen::VectorXd::Zero(1), nn::Activation::identity});
    a.critic.layers[0].weights << 0.0, 0.5;
    a.target_actor = a.actor;
    a.target_critic = nn::zeros_like(a.critic);
    a.actor_opt = nn::make_adam(a.actor);
    a.critic_opt = nn::make_adam(a.critic);

    const Transition t{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 0.8), -0.3,
                       Eigen::VectorXd::Zero(1), false};
    HyperParameters hp = small_lr(1e-3);
    hp.clip = 1e9;
    critic_update(a, {&t}, hp);
    const double g = 2.0 * 0.8 * (0.5 * 0.8 + 0.3);
    // Adam's first step is lr * sign(g)
    CHECK(a.critic.layers[0].weights(0, 1) == Approx(0.5 - 1e-3 * g / (g + 1e-8)).epsilon(1e-12));
    CHECK(a.critic.layers[0].weights(0, 0) == 0.0);
}

TEST_CASE("actor update") {
    std::mt19937_64 rng(9);
    Agent a = make_agent(3, 2, {8, 8}, rng);
    const auto ts = random_transitions(16, 3, 2, 10);
    const auto batch = pointers(ts);
    const double before = actor_objective(a, batch);
    Agent b = a;
    CHECK(actor_update(b, batch, small_lr(1e-6)) == Approx(before).epsilon(1e-14));
    CHECK(actor_objective(b, batch) > before);
    CHECK(b.critic == a.critic);

    // critic blind to the action: no actor gradient
    Agent blind = a;
    blind.critic.layers[0].weights.rightCols(2).setZero();
    const Agent blind0 = blind;
    actor_update(blind, batch, small_lr(1e-3));
    CHECK(blind.actor == blind0.actor);
}

TEST_CASE("actor follows dQ/da = 1") {
    Agent a;
    a.actor.layers.push_back({Eigen::MatrixXd::Constant(1, 1, 0.2), Eigen::VectorXd::Zero(1),
                              nn::Activation::identity});
    a.critic.layers.push_back({Eigen::MatrixXd(1, 2), Eigen::VectorXd::Zero(1), nn::Activation::identity});
    a.critic.layers[0].weights << 0.0, 1.0;
    a.target_actor = a.actor;
    a.target_critic = a.critic;
    a.actor_opt = nn::make_adam(a.actor);
    a.critic_opt = nn::make_adam(a.critic);
    const Transition t{Eigen::VectorXd::Constant(1, 0.5), Eigen::VectorXd::Zero(1), 0.0,
                       Eigen::VectorXd::Zero(1), false};
    actor_update(a, {&t}, small_lr(1e-3));
    CHECK(a.actor.layers[0].weights(0, 0) > 0.2);
}

TEST_CASE("target lag is exact") {
    std::mt19937_64 rng(11);
    Agent a = make_agent(3, 4, {8}, rng);
    const auto ts = random_transitions(8, 3, 4, 12);
    critic_update(a, pointers(ts), HyperParameters{});
    actor_update(a, pointers(ts), HyperParameters{});
    const Agent prev = a;
    update_targets(a, 0.001);
    for (std::size_t k = 0; k < a.actor.layers.size(); ++k) {
        const Eigen::MatrixXd expect =
            0.001 * prev.actor.layers[k].weights + (1.0 - 0.001) * prev.target_actor.layers[k].weights;
        CHECK(a.target_actor.layers[k].weights == expect);
    }
}

TEST_CASE("agent text format") {
    std::mt19937_64 rng(13);
    const Agent a = make_agent(3, 4, {8, 8}, rng);
    std::stringstream ss;
    write_agent(ss, a);
    const Agent b = read_agent(ss);
    CHECK(b.actor == a.actor);
    CHECK(b.critic == a.critic);
    CHECK(b.target_actor == a.target_actor);
    CHECK(b.target_critic == a.target_critic);

    std::string text;
    {
        std::stringstream s2;
        write_agent(s2, a);
        text = s2.str();
    }
    const auto pos = text.find("section critic");
    std::istringstream broken(text.substr(0, pos) + "section target_actor\n" + text.substr(pos + 15));
    CHECK_THROWS_AS(read_agent(broken), ParseError);
}

TEST_CASE("training with zero episodes returns the initial agent") {
    Environment env;
    RngStreams rng(0);
    const ddpg::Agent a = make_agent(env, rng.init);
    const TrainResult r = train(env, a, rng, 0);
    CHECK(r.curve.empty());
    CHECK(r.agent.actor == a.actor);
    CHECK(r.updates == 0);
}

TEST_CASE("training is deterministic and stores non-positive rewards") {
    Environment env;
    env.hp.max_steps = 30;
    env.hp.batch_size = 8;
    auto run = [&] {
        RngStreams rng(5);
        return train(env, make_agent(env, rng.init), rng, 4);
    };
    const TrainResult a = run();
    const TrainResult b = run();
    REQUIRE(a.curve.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(a.curve[i].episode_reward == b.curve[i].episode_reward);
        CHECK(a.curve[i].episode_reward <= 0.0);
    }
    CHECK(a.agent.actor == b.agent.actor);
    CHECK(a.updates > 0);
}
