// Deep deterministic policy gradient: replay buffer, Ornstein-Uhlenbeck exploration,
// critic and actor updates and soft target tracking.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flightrl/error.hpp"
#include "flightrl/hyperparams.hpp"
#include "flightrl/mlp.hpp"
#include "flightrl/textio.hpp"

namespace flightrl::ddpg {

struct Transition {
    Eigen::VectorXd observation;
    Eigen::VectorXd action;  // executed (noisy, clamped) normalised action
    double reward = 0.0;
    Eigen::VectorXd next_observation;
    bool truncated = false;
};

/// Fixed-capacity FIFO; once full, each push overwrites the oldest entry.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw ContractViolation("ReplayBuffer: capacity must be > 0");
    }

    void push(Transition t) {
        if (data_.size() < capacity_) {
            data_.push_back(std::move(t));
        } else {
            data_[head_] = std::move(t);
        }
        head_ = (head_ + 1) % capacity_;
    }

    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool ready(std::size_t n) const { return data_.size() >= n && n > 0; }

    /// Entry i in insertion order, 0 = oldest still held.
    const Transition &at(std::size_t i) const {
        if (i >= data_.size()) throw ContractViolation("ReplayBuffer::at: index out of range");
        const std::size_t start = data_.size() < capacity_ ? 0 : head_;
        return data_[(start + i) % capacity_];
    }

    /// n indices drawn uniformly with replacement; nullopt while fewer than n entries.
    std::optional<std::vector<std::size_t>> sample_indices(std::size_t n,
                                                           std::mt19937_64 &rng) const {
        if (!ready(n)) return std::nullopt;
        std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
        std::vector<std::size_t> idx(n);
        for (auto &i : idx) i = pick(rng);
        return idx;
    }

    std::optional<std::vector<const Transition *>> sample(std::size_t n, std::mt19937_64 &rng) const {
        auto idx = sample_indices(n, rng);
        if (!idx) return std::nullopt;
        std::vector<const Transition *> out;
        out.reserve(n);
        for (std::size_t i : *idx) out.push_back(&data_[i]);
        return out;
    }

  private:
    std::size_t capacity_;
    std::vector<Transition> data_;
    std::size_t head_ = 0;
};

// ---------------------------------------------------------------------------
// Exploration noise
// ---------------------------------------------------------------------------

/// v <- v + beta (mu - v) dt + N(0, sigma) sqrt(dt),  sigma <- sigma (1 - decay).
/// sigma is a variance shared by every component.
struct OuNoise {
    Eigen::VectorXd value;
    double mean = 0.0;
    double attraction = 0.15;
    double sigma = 0.1;
    double decay = 1e-6;
    double dt = 0.01;

    void reset() { value.setConstant(mean); }
};

inline OuNoise make_noise(int size, const HyperParameters &hp) {
    OuNoise n;
    n.value = Eigen::VectorXd::Constant(size, hp.noise_mean);
    n.mean = hp.noise_mean;
    n.attraction = hp.noise_attraction;
    n.sigma = hp.noise_sigma;
    n.decay = hp.noise_decay;
    n.dt = hp.sample_time;
    return n;
}

/// Returns the new noise sample and advances the variance schedule.
inline Eigen::VectorXd ou_step(OuNoise &n, std::mt19937_64 &rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sd = std::sqrt(n.sigma) * std::sqrt(n.dt);
    for (Eigen::Index i = 0; i < n.value.size(); ++i) {
        const double w = normal(rng);
        n.value(i) += n.attraction * (n.mean - n.value(i)) * n.dt + sd * w;
    }
    n.sigma *= 1.0 - n.decay;
    return n.value;
}

// ---------------------------------------------------------------------------
// Agent
// ---------------------------------------------------------------------------

struct Agent {
    nn::MlpParameters actor;
    nn::MlpParameters critic;
    nn::MlpParameters target_actor;
    nn::MlpParameters target_critic;
    nn::AdamState actor_opt;
    nn::AdamState critic_opt;

    int observation_size() const { return static_cast<int>(actor.input_size()); }
    int action_size() const { return static_cast<int>(actor.output_size()); }
};

/// Actor obs -> hidden... -> action (tanh), critic [obs; action] -> hidden... -> 1.
/// Targets start as exact copies.
inline Agent make_agent(int observation_size, int action_size, const std::vector<int> &hidden,
                        std::mt19937_64 &rng) {
    std::vector<int> actor_sizes{observation_size};
    actor_sizes.insert(actor_sizes.end(), hidden.begin(), hidden.end());
    actor_sizes.push_back(action_size);
    std::vector<int> critic_sizes{observation_size + action_size};
    critic_sizes.insert(critic_sizes.end(), hidden.begin(), hidden.end());
    critic_sizes.push_back(1);

    Agent a;
    a.actor = nn::make_mlp(actor_sizes, nn::Activation::tanh, rng);
    a.critic = nn::make_mlp(critic_sizes, nn::Activation::identity, rng);
    a.target_actor = a.actor;
    a.target_critic = a.critic;
    a.actor_opt = nn::make_adam(a.actor);
    a.critic_opt = nn::make_adam(a.critic);
    return a;
}

struct ActionChoice {
    Eigen::VectorXd executed;
    Eigen::VectorXd raw;
};

/// raw = actor(o); when exploring, executed = clamp(raw + noise, -1, 1).
inline ActionChoice select_action(const Agent &agent, const Eigen::VectorXd &observation,
                                  const Eigen::VectorXd *noise) {
    ActionChoice c;
    c.raw = nn::forward(agent.actor, observation);
    if (noise) {
        if (noise->size() != c.raw.size()) throw ContractViolation("select_action: noise size mismatch");
        c.executed = (c.raw + *noise).cwiseMax(-1.0).cwiseMin(1.0);
    } else {
        c.executed = c.raw;
    }
    return c;
}

namespace detail {

inline Eigen::MatrixXd critic_input(const Eigen::MatrixXd &obs, const Eigen::MatrixXd &act) {
    Eigen::MatrixXd x(obs.rows() + act.rows(), obs.cols());
    x.topRows(obs.rows()) = obs;
    x.bottomRows(act.rows()) = act;
    return x;
}

struct Batch {
    Eigen::MatrixXd obs;
    Eigen::MatrixXd act;
    Eigen::RowVectorXd reward;
    Eigen::MatrixXd next_obs;
};

inline Batch stack(const std::vector<const Transition *> &batch) {
    if (batch.empty()) throw ContractViolation("empty minibatch");
    const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
    const Eigen::Index os = batch.front()->observation.size();
    const Eigen::Index as = batch.front()->action.size();
    Batch b{Eigen::MatrixXd(os, n), Eigen::MatrixXd(as, n), Eigen::RowVectorXd(n),
            Eigen::MatrixXd(os, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const Transition &t = *batch[static_cast<std::size_t>(i)];
        b.obs.col(i) = t.observation;
        b.act.col(i) = t.action;
        b.reward(i) = t.reward;
        b.next_obs.col(i) = t.next_observation;
    }
    return b;
}

// Truncation is a time limit or a divergence cut, never a terminal state, so the
// bootstrap term is always kept.
inline Eigen::RowVectorXd td_targets(const Agent &agent, const Batch &b, double discount) {
    const Eigen::MatrixXd next_act = nn::forward(agent.target_actor, b.next_obs);
    const Eigen::MatrixXd next_q = nn::forward(agent.target_critic, critic_input(b.next_obs, next_act));
    return b.reward + discount * next_q.row(0);
}

} // namespace detail

/// delta = r + gamma Q'(s', mu'(s')) - Q(s, a)
inline double td_error(const Agent &agent, const Transition &t, double discount) {
    const Eigen::VectorXd next_act = nn::forward(agent.target_actor, t.next_observation);
    Eigen::VectorXd next_in(t.next_observation.size() + next_act.size());
    next_in << t.next_observation, next_act;
    Eigen::VectorXd in(t.observation.size() + t.action.size());
    in << t.observation, t.action;
    return t.reward + discount * nn::forward(agent.target_critic, next_in)(0) -
           nn::forward(agent.critic, in)(0);
}

/// Mean squared TD error over the batch with targets held fixed.
inline double critic_loss(const Agent &agent, const std::vector<const Transition *> &batch,
                          double discount) {
    const auto b = detail::stack(batch);
    const Eigen::RowVectorXd y = detail::td_targets(agent, b, discount);
    const Eigen::MatrixXd q = nn::forward(agent.critic, detail::critic_input(b.obs, b.act));
    return (q.row(0) - y).squaredNorm() / static_cast<double>(batch.size());
}

/// Mean of Q(s, mu(s)) over the batch.
inline double actor_objective(const Agent &agent, const std::vector<const Transition *> &batch) {
    const auto b = detail::stack(batch);
    const Eigen::MatrixXd act = nn::forward(agent.actor, b.obs);
    return nn::forward(agent.critic, detail::critic_input(b.obs, act)).mean();
}

/// Gradient step on the mean squared TD error. Returns the loss before the step.
inline double critic_update(Agent &agent, const std::vector<const Transition *> &batch,
                            const HyperParameters &hp) {
    const auto b = detail::stack(batch);
    const Eigen::RowVectorXd y = detail::td_targets(agent, b, hp.discount);
    nn::ForwardCache cache;
    const Eigen::MatrixXd q = nn::forward(agent.critic, detail::critic_input(b.obs, b.act), &cache);
    const Eigen::RowVectorXd diff = q.row(0) - y;
    const double n = static_cast<double>(batch.size());
    const Eigen::MatrixXd grad_out = (2.0 / n) * diff;
    auto back = nn::backward(agent.critic, cache, grad_out);
    if (!back.grads.finite()) throw DivergenceError("critic gradient is not finite");
    nn::adam_step(agent.critic, agent.critic_opt, std::move(back.grads), hp.critic_lr, hp.l2, hp.clip);
    return diff.squaredNorm() / n;
}

/// Ascends the mean critic value of the actor's own actions. Returns the objective
/// before the step.
inline double actor_update(Agent &agent, const std::vector<const Transition *> &batch,
                           const HyperParameters &hp) {
    const auto b = detail::stack(batch);
    nn::ForwardCache actor_cache;
    const Eigen::MatrixXd act = nn::forward(agent.actor, b.obs, &actor_cache);
    nn::ForwardCache critic_cache;
    const Eigen::MatrixXd q =
        nn::forward(agent.critic, detail::critic_input(b.obs, act), &critic_cache);
    const double n = static_cast<double>(batch.size());

    // d(-mean Q)/dQ = -1/N per sample
    const Eigen::MatrixXd grad_q = Eigen::MatrixXd::Constant(1, q.cols(), -1.0 / n);
    const auto critic_back = nn::backward(agent.critic, critic_cache, grad_q);
    const Eigen::MatrixXd grad_act = critic_back.input_gradient.bottomRows(act.rows());
    auto back = nn::backward(agent.actor, actor_cache, grad_act);
    if (!back.grads.finite()) throw DivergenceError("actor gradient is not finite");
    nn::adam_step(agent.actor, agent.actor_opt, std::move(back.grads), hp.actor_lr, hp.l2, hp.clip);
    return q.mean();
}

inline void update_targets(Agent &agent, double tau) {
    nn::soft_update(agent.target_actor, agent.actor, tau);
    nn::soft_update(agent.target_critic, agent.critic, tau);
}

// ---------------------------------------------------------------------------
// Persistence: four mlpv1 blocks, each preceded by a section line.
// ---------------------------------------------------------------------------

inline constexpr const char *kAgentMagic = "agentv1";

inline void write_agent(std::ostream &out, const Agent &a) {
    out << kAgentMagic << '\n';
    const std::pair<const char *, const nn::MlpParameters *> sections[] = {
        {"actor", &a.actor},
        {"critic", &a.critic},
        {"target_actor", &a.target_actor},
        {"target_critic", &a.target_critic}};
    for (const auto &[name, net] : sections) {
        out << "section " << name << '\n';
        nn::write_mlp(out, *net);
    }
}

/// Optimiser state is not persisted; a loaded agent gets fresh Adam moments.
inline Agent read_agent(std::istream &in, const std::string &source = "agent") {
    textio::LineReader r(in, source);
    const auto header = r.expect_tokens("agent header");
    if (header.size() != 1 || header[0] != kAgentMagic) {
        r.fail("unsupported agent format '" + header[0] + "'");
    }
    Agent a;
    nn::MlpParameters *targets[] = {&a.actor, &a.critic, &a.target_actor, &a.target_critic};
    const char *names[] = {"actor", "critic", "target_actor", "target_critic"};
    for (int i = 0; i < 4; ++i) {
        const auto sec = r.expect_tokens("section header");
        if (sec.size() != 2 || sec[0] != "section" || sec[1] != names[i]) {
            r.fail(std::string("expected 'section ") + names[i] + "'");
        }
        *targets[i] = nn::read_mlp(r);
    }
    std::vector<std::string> extra;
    if (r.next_tokens(extra)) r.fail("trailing data after agent");

    if (a.actor.output_size() < 1 || a.critic.output_size() != 1 ||
        a.critic.input_size() != a.actor.input_size() + a.actor.output_size() ||
        !a.target_actor.same_shape(a.actor) || !a.target_critic.same_shape(a.critic)) {
        r.fail("network shapes are inconsistent");
    }
    a.actor_opt = nn::make_adam(a.actor);
    a.critic_opt = nn::make_adam(a.critic);
    return a;
}

} // namespace flightrl::ddpg
