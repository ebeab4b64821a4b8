#pragma once

#include "edgeslice/core.hpp"
#include "edgeslice/env.hpp"
#include "edgeslice/nn.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <vector>

namespace edgeslice {

/// Divisors applied before values enter the networks.
struct StateScales {
    double queue = 100.0;         // tasks
    double coordination = 100.0;  // period-summed performance
};

enum class StateLayout {
    full,               // [queue lengths, coordination]
    coordination_only,  // EdgeSlice-NT
};

/// Normalized network input for one RA.
struct AgentState {
    Vector values;
    StateLayout layout = StateLayout::full;

    int size() const { return static_cast<int>(values.size()); }
};

AgentState make_agent_state(const Vector& queue_lengths, const Vector& coordination, const StateScales& scales,
                            StateLayout layout = StateLayout::full);

int state_size(int num_slices, StateLayout layout);

/// Capacity fractions per (slice, resource), every entry in [0,1].
struct AgentAction {
    Matrix fractions;

    Allocation materialize(const Vector& capacity) const {
        return Allocation::from_fractions(fractions, capacity);
    }
    /// Row-major (slice-major) flattening used as network output.
    Vector flat() const;
    static AgentAction from_flat(const Vector& flat, int num_slices, int num_resources);
};

/// Reward for one interval in one RA:
/// sum_i [U_i - rho/2 (U_i - target_i / T)^2] - beta * sum_k max(0, colsum_k - capacity_k).
double shaped_reward(const Vector& perf, const Allocation& alloc, const Vector& coord_target, double rho,
                     double beta, const Vector& capacity, int period_len);

struct Transition {
    Vector state;
    Vector action;
    double reward = 0.0;
    Vector next_state;
};

/// Fixed-capacity ring buffer with uniform sampling (with replacement).
class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return buffer_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t index) const { return buffer_.at(index); }
    std::vector<std::size_t> sample_indices(std::size_t batch, std::mt19937_64& rng) const;

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<Transition> buffer_;
};

/// Additive Gaussian action noise; the deviation only shrinks on decay().
class ExplorationNoise {
public:
    ExplorationNoise(double initial_std = 1.0, double decay = 0.9999);

    double std() const { return std_; }
    void set_std(double std) { std_ = std; }
    void decay() { std_ *= decay_; }
    Vector sample(int size, std::mt19937_64& rng) const;

private:
    double std_;
    double decay_;
};

struct DdpgConfig {
    std::vector<int> hidden{128, 128};
    double actor_lr = 1e-3;
    double critic_lr = 1e-3;
    double gamma = 0.99;
    double tau = 0.005;
    int batch_size = 512;
    std::size_t replay_capacity = 100'000;
    double noise_std = 1.0;
    double noise_decay = 0.9999;
    double leaky_slope = 0.01;
    /// Multiplies rewards before they enter the Bellman target.
    double reward_scale = 1.0;
    /// L2 weight on the actor's output pre-activations; keeps the sigmoid out of
    /// saturation. 0 disables it.
    double preactivation_l2 = 0.0;
    /// Compress rewards with sign(r) * log(1 + |r|) before the Bellman target.
    bool symlog_rewards = false;
};

struct UpdateMetrics {
    double critic_loss = 0.0;
    double actor_objective = 0.0;
};

/// Seam over the trainer so alternatives to DDPG can plug into offline training.
class Learner {
public:
    virtual ~Learner() = default;

    virtual AgentAction act(const AgentState& state, bool explore) = 0;
    virtual AgentAction random_action() = 0;
    virtual void remember(Transition t) = 0;
    virtual bool ready() const = 0;
    /// One training step; empty when the learner cannot update yet.
    virtual std::optional<UpdateMetrics> update() = 0;

    /// Remember the current greedy policy / bring it back. Used to keep the
    /// best policy seen during training; learners without support ignore both.
    virtual void keep_policy() {}
    virtual void restore_policy() {}
};

class DdpgAgent final : public Learner {
public:
    DdpgAgent(int num_slices, int num_resources, StateLayout layout, DdpgConfig config, std::uint64_t seed);

    int num_slices() const { return num_slices_; }
    int num_resources() const { return num_resources_; }
    StateLayout layout() const { return layout_; }
    int state_dim() const { return state_dim_; }
    int action_dim() const { return num_slices_ * num_resources_; }
    const DdpgConfig& config() const { return config_; }

    AgentAction act(const AgentState& state, bool explore) override;
    AgentAction random_action() override;
    void remember(Transition t) override;
    bool ready() const override;
    std::optional<UpdateMetrics> update() override;
    /// Only the actor is kept: the greedy policy is all acting depends on.
    void keep_policy() override { kept_actor_ = actor_; }
    void restore_policy() override;

    /// Mean squared Bellman error over `batch` (indices into the replay memory).
    double critic_loss(const std::vector<std::size_t>& batch) const;
    /// Bellman targets r + gamma * Q'(s', mu'(s')) for `batch`.
    Vector bellman_targets(const std::vector<std::size_t>& batch) const;

    nn::Mlp& actor() { return actor_; }
    nn::Mlp& critic() { return critic_; }
    nn::Mlp& actor_target() { return actor_target_; }
    nn::Mlp& critic_target() { return critic_target_; }
    const nn::Mlp& actor() const { return actor_; }
    const nn::Mlp& critic() const { return critic_; }
    ReplayMemory& replay() { return replay_; }
    ExplorationNoise& noise() { return noise_; }
    const ExplorationNoise& noise() const { return noise_; }
    long updates() const { return updates_; }

    /// Networks, optimizer moments and noise level. Replay contents are not saved.
    void save(std::ostream& out) const;
    /// Refuses checkpoints whose architecture differs from this agent's.
    void load(std::istream& in);

private:
    Matrix stack_states(const std::vector<std::size_t>& batch, bool next) const;
    Matrix stack_actions(const std::vector<std::size_t>& batch) const;

    int num_slices_;
    int num_resources_;
    StateLayout layout_;
    int state_dim_;
    DdpgConfig config_;
    std::mt19937_64 rng_;
    nn::Mlp actor_;
    nn::Mlp critic_;
    nn::Mlp actor_target_;
    nn::Mlp critic_target_;
    nn::Adam actor_opt_;
    nn::Adam critic_opt_;
    ReplayMemory replay_;
    ExplorationNoise noise_;
    long updates_ = 0;
    std::optional<nn::Mlp> kept_actor_;
};

/// Draws one coordination vector (z - y per slice) for a training episode.
using CoordinationSampler = std::function<Vector(std::mt19937_64&)>;

/// Independent uniform draws in [low, high] per slice.
CoordinationSampler uniform_coordination(int num_slices, double low, double high);

struct TrainOptions {
    int period_len = 10;
    double rho = 1.0;
    double beta = 20.0;
    StateScales scales;
    /// Episode queues start uniform in [0, initial_queue_max].
    double initial_queue_max = 0.0;
    std::uint64_t seed = 0;
    /// Every this many steps the greedy policy is scored on a fixed validation
    /// set and the best one is kept for the end of training. 0 disables it.
    long validation_every = 0;
    int validation_episodes = 16;
};

struct TrainResult {
    std::vector<double> episode_rewards;
    long steps = 0;
    long updates = 0;
    /// Set when validation ran: score and step of the policy that was kept.
    std::optional<double> best_validation;
    long best_step = -1;
};

/// Fixed episodes used to compare greedy policies during training.
struct ValidationSet {
    std::vector<Vector> coordination;
    std::vector<std::uint64_t> env_seeds;
};

ValidationSet make_validation_set(const CoordinationSampler& sampler, int episodes, std::uint64_t seed);

/// Mean shaped return of noise-free episodes over `set`, starting from empty queues.
double greedy_validation(Learner& learner, StateLayout layout, const Environment& env, const ValidationSet& set,
                         const TrainOptions& options);

/// Offline training on a single-RA environment. One episode is one coordination
/// period with a freshly sampled coordination vector; until the learner is ready
/// actions are uniform random.
TrainResult train_offline(Learner& learner, StateLayout layout, const Environment& env,
                          const CoordinationSampler& sampler, long total_steps, const TrainOptions& options);

}  // namespace edgeslice
