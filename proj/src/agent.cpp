#include "edgeslice/agent.hpp"

#include "edgeslice/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace edgeslice {

int state_size(int num_slices, StateLayout layout) {
    return layout == StateLayout::full ? 2 * num_slices : num_slices;
}

AgentState make_agent_state(const Vector& queue_lengths, const Vector& coordination, const StateScales& scales,
                            StateLayout layout) {
    if (!(scales.queue > 0.0) || !(scales.coordination > 0.0)) {
        throw ConfigError("state scales must be positive");
    }
    AgentState s;
    s.layout = layout;
    if (layout == StateLayout::coordination_only) {
        s.values = coordination / scales.coordination;
        return s;
    }
    if (queue_lengths.size() != coordination.size()) {
        throw ConfigError("agent state: queue and coordination vectors differ in length");
    }
    s.values.resize(2 * queue_lengths.size());
    s.values << queue_lengths / scales.queue, coordination / scales.coordination;
    return s;
}

Vector AgentAction::flat() const {
    Vector v(fractions.size());
    Eigen::Index n = 0;
    for (Eigen::Index i = 0; i < fractions.rows(); ++i) {
        for (Eigen::Index k = 0; k < fractions.cols(); ++k) v(n++) = fractions(i, k);
    }
    return v;
}

AgentAction AgentAction::from_flat(const Vector& flat, int num_slices, int num_resources) {
    if (flat.size() != static_cast<Eigen::Index>(num_slices) * num_resources) {
        throw ConfigError("action vector has the wrong length");
    }
    AgentAction a{Matrix(num_slices, num_resources)};
    Eigen::Index n = 0;
    for (int i = 0; i < num_slices; ++i) {
        for (int k = 0; k < num_resources; ++k) a.fractions(i, k) = flat(n++);
    }
    return a;
}

double shaped_reward(const Vector& perf, const Allocation& alloc, const Vector& coord_target, double rho,
                     double beta, const Vector& capacity, int period_len) {
    if (perf.size() != coord_target.size() || perf.size() != alloc.num_slices()) {
        throw ConfigError("shaped_reward: slice dimension mismatch");
    }
    if (period_len < 1) throw ConfigError("shaped_reward: period length must be >= 1");
    const Vector gap = perf - coord_target / static_cast<double>(period_len);
    const double tracking = perf.sum() - 0.5 * rho * gap.squaredNorm();
    return tracking - beta * capacity_violation(alloc, capacity).sum();
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ConfigError("replay memory capacity must be positive");
}

void ReplayMemory::push(Transition t) {
    if (buffer_.size() < capacity_) {
        buffer_.push_back(std::move(t));
    } else {
        buffer_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayMemory::sample_indices(std::size_t batch, std::mt19937_64& rng) const {
    if (batch > buffer_.size()) throw ConfigError("replay sample larger than current fill");
    std::uniform_int_distribution<std::size_t> pick(0, buffer_.size() - 1);
    std::vector<std::size_t> idx(batch);
    for (auto& i : idx) i = pick(rng);
    return idx;
}

ExplorationNoise::ExplorationNoise(double initial_std, double decay) : std_(initial_std), decay_(decay) {
    if (!(std_ >= 0.0)) throw ConfigError("noise std must be >= 0");
    if (!(decay_ >= 0.0 && decay_ <= 1.0)) throw ConfigError("noise decay must lie in [0, 1]");
}

Vector ExplorationNoise::sample(int size, std::mt19937_64& rng) const {
    std::normal_distribution<double> dist(0.0, 1.0);
    Vector v(size);
    for (int n = 0; n < size; ++n) v(n) = std_ * dist(rng);
    return v;
}

namespace {

std::vector<int> with_ends(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> sizes{in};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(out);
    return sizes;
}

}  // namespace

DdpgAgent::DdpgAgent(int num_slices, int num_resources, StateLayout layout, DdpgConfig config, std::uint64_t seed)
    : num_slices_(num_slices),
      num_resources_(num_resources),
      layout_(layout),
      state_dim_(state_size(num_slices, layout)),
      config_(std::move(config)),
      rng_(seed),
      actor_(nn::Mlp::uniform_init(with_ends(state_dim_, config_.hidden, num_slices * num_resources),
                                   nn::Activation::sigmoid, rng_, config_.leaky_slope)),
      critic_(nn::Mlp::uniform_init(with_ends(state_dim_ + num_slices * num_resources, config_.hidden, 1),
                                    nn::Activation::identity, rng_, config_.leaky_slope)),
      actor_target_(actor_),
      critic_target_(critic_),
      actor_opt_(actor_, config_.actor_lr),
      critic_opt_(critic_, config_.critic_lr),
      replay_(config_.replay_capacity),
      noise_(config_.noise_std, config_.noise_decay) {
    if (num_slices < 1 || num_resources < 1) throw ConfigError("agent needs at least one slice and resource");
    if (config_.batch_size < 1) throw ConfigError("batch size must be positive");
    if (!(config_.gamma >= 0.0 && config_.gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
    if (!(config_.tau > 0.0 && config_.tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
}

AgentAction DdpgAgent::act(const AgentState& state, bool explore) {
    if (state.size() != state_dim_) {
        throw ConfigError("agent expects a state of size " + std::to_string(state_dim_) + ", got " +
                          std::to_string(state.size()));
    }
    Vector a = actor_.forward(state.values);
    if (explore) {
        a += noise_.sample(action_dim(), rng_);
        a = a.cwiseMax(0.0).cwiseMin(1.0);
    }
    return AgentAction::from_flat(a, num_slices_, num_resources_);
}

AgentAction DdpgAgent::random_action() {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Vector a(action_dim());
    for (int n = 0; n < action_dim(); ++n) a(n) = dist(rng_);
    return AgentAction::from_flat(a, num_slices_, num_resources_);
}

void DdpgAgent::remember(Transition t) {
    if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_ || t.action.size() != action_dim()) {
        throw ConfigError("transition does not match agent dimensions");
    }
    replay_.push(std::move(t));
}

bool DdpgAgent::ready() const { return replay_.size() >= static_cast<std::size_t>(config_.batch_size); }

Matrix DdpgAgent::stack_states(const std::vector<std::size_t>& batch, bool next) const {
    Matrix s(state_dim_, static_cast<Eigen::Index>(batch.size()));
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& t = replay_.at(batch[b]);
        s.col(static_cast<Eigen::Index>(b)) = next ? t.next_state : t.state;
    }
    return s;
}

Matrix DdpgAgent::stack_actions(const std::vector<std::size_t>& batch) const {
    Matrix a(action_dim(), static_cast<Eigen::Index>(batch.size()));
    for (std::size_t b = 0; b < batch.size(); ++b) a.col(static_cast<Eigen::Index>(b)) = replay_.at(batch[b]).action;
    return a;
}

Vector DdpgAgent::bellman_targets(const std::vector<std::size_t>& batch) const {
    const Matrix next = stack_states(batch, true);
    Matrix critic_in(state_dim_ + action_dim(), next.cols());
    critic_in << next, actor_target_.forward(next);
    const Vector bootstrap = critic_target_.forward(critic_in).row(0).transpose();
    Vector g(static_cast<Eigen::Index>(batch.size()));
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto i = static_cast<Eigen::Index>(b);
        double r = replay_.at(batch[b]).reward;
        if (config_.symlog_rewards) r = std::copysign(std::log1p(std::abs(r)), r);
        g(i) = config_.reward_scale * r + config_.gamma * bootstrap(i);
    }
    return g;
}

double DdpgAgent::critic_loss(const std::vector<std::size_t>& batch) const {
    if (batch.empty()) throw ConfigError("critic_loss: empty batch");
    const Vector g = bellman_targets(batch);
    Matrix critic_in(state_dim_ + action_dim(), static_cast<Eigen::Index>(batch.size()));
    critic_in << stack_states(batch, false), stack_actions(batch);
    const Vector q = critic_.forward(critic_in).row(0).transpose();
    return (g - q).squaredNorm() / static_cast<double>(batch.size());
}

std::optional<UpdateMetrics> DdpgAgent::update() {
    if (!ready()) return std::nullopt;
    const auto batch = replay_.sample_indices(static_cast<std::size_t>(config_.batch_size), rng_);
    const auto n = static_cast<double>(batch.size());
    const Matrix states = stack_states(batch, false);

    // Critic: descend the mean squared Bellman error with g held fixed.
    const Vector g = bellman_targets(batch);
    Matrix critic_in(state_dim_ + action_dim(), states.cols());
    critic_in << states, stack_actions(batch);
    const Vector q = critic_.forward(critic_in).row(0).transpose();
    const Vector diff = q - g;
    UpdateMetrics metrics;
    metrics.critic_loss = diff.squaredNorm() / n;
    critic_opt_.apply(critic_, critic_.backward(critic_in, Matrix((2.0 / n) * diff.transpose())));

    // Actor: ascend Q(s, mu(s)) through the chain rule dQ/da * dmu/dtheta.
    const Matrix actions = actor_.forward(states);
    Matrix policy_in(state_dim_ + action_dim(), states.cols());
    policy_in << states, actions;
    metrics.actor_objective = critic_.forward(policy_in).mean();
    const auto critic_tape = critic_.backward(policy_in, Matrix::Constant(1, states.cols(), 1.0 / n));
    const Matrix dq_da = critic_tape.input.bottomRows(action_dim());
    if (config_.preactivation_l2 > 0.0) {
        // Ascent direction of -l2 * mean ||pre||^2.
        const Matrix pre_grad = (-2.0 * config_.preactivation_l2 / n) * actor_.output_preactivation(states);
        actor_opt_.apply(actor_, actor_.backward(states, dq_da, &pre_grad), -1.0);
    } else {
        actor_opt_.apply(actor_, actor_.backward(states, dq_da), -1.0);
    }

    nn::soft_update(critic_target_, critic_, config_.tau);
    nn::soft_update(actor_target_, actor_, config_.tau);
    noise_.decay();
    ++updates_;
    return metrics;
}

void DdpgAgent::save(std::ostream& out) const {
    out << "edgeslice-agent 1\n";
    out << "slices " << num_slices_ << "\nresources " << num_resources_ << "\nlayout "
        << (layout_ == StateLayout::full ? "full" : "coordination_only") << "\nnoise_std "
        << text_io::format(noise_.std()) << "\nupdates " << updates_ << '\n';
    out << "[actor]\n";
    actor_.save(out);
    out << "[critic]\n";
    critic_.save(out);
    out << "[actor_target]\n";
    actor_target_.save(out);
    out << "[critic_target]\n";
    critic_target_.save(out);
    out << "[actor_optimizer]\n";
    actor_opt_.save(out);
    out << "[critic_optimizer]\n";
    critic_opt_.save(out);
}

void DdpgAgent::load(std::istream& in) {
    const std::string ctx = "agent checkpoint";
    text_io::expect(in, "edgeslice-agent", ctx);
    if (text_io::parse_long(in, ctx) != 1) throw ConfigError(ctx + ": unsupported version");
    text_io::expect(in, "slices", ctx);
    const long slices = text_io::parse_long(in, ctx);
    text_io::expect(in, "resources", ctx);
    const long resources = text_io::parse_long(in, ctx);
    text_io::expect(in, "layout", ctx);
    const auto layout_name = text_io::next_token(in, ctx);
    const auto layout = layout_name == "full" ? StateLayout::full : StateLayout::coordination_only;
    if (slices != num_slices_ || resources != num_resources_ || layout != layout_) {
        throw ConfigError(ctx + ": architecture mismatch (checkpoint " + std::to_string(slices) + " slices, " +
                          std::to_string(resources) + " resources, layout " + layout_name + ")");
    }
    text_io::expect(in, "noise_std", ctx);
    const double noise_std = text_io::parse_double(text_io::next_token(in, ctx), ctx);
    text_io::expect(in, "updates", ctx);
    const long updates = text_io::parse_long(in, ctx);

    auto load_net = [&](const char* section, const nn::Mlp& like) {
        text_io::expect(in, section, ctx);
        nn::Mlp net = nn::Mlp::load(in);
        if (!net.same_architecture(like)) {
            throw ConfigError(ctx + ": " + section + " architecture does not match this agent");
        }
        return net;
    };
    nn::Mlp actor = load_net("[actor]", actor_);
    nn::Mlp critic = load_net("[critic]", critic_);
    nn::Mlp actor_target = load_net("[actor_target]", actor_);
    nn::Mlp critic_target = load_net("[critic_target]", critic_);
    text_io::expect(in, "[actor_optimizer]", ctx);
    nn::Adam actor_opt = nn::Adam::load(in);
    text_io::expect(in, "[critic_optimizer]", ctx);
    nn::Adam critic_opt = nn::Adam::load(in);

    actor_ = std::move(actor);
    critic_ = std::move(critic);
    actor_target_ = std::move(actor_target);
    critic_target_ = std::move(critic_target);
    actor_opt_ = std::move(actor_opt);
    critic_opt_ = std::move(critic_opt);
    noise_.set_std(noise_std);
    updates_ = updates;
}

void DdpgAgent::restore_policy() {
    if (kept_actor_) actor_ = *kept_actor_;
}

CoordinationSampler uniform_coordination(int num_slices, double low, double high) {
    if (!(low <= high)) throw ConfigError("coordination sampler needs low <= high");
    return [num_slices, low, high](std::mt19937_64& rng) {
        std::uniform_real_distribution<double> dist(low, high);
        Vector c(num_slices);
        for (int i = 0; i < num_slices; ++i) c(i) = dist(rng);
        return c;
    };
}

TrainResult train_offline(Learner& learner, StateLayout layout, const Environment& env,
                          const CoordinationSampler& sampler, long total_steps, const TrainOptions& options) {
    if (env.num_ras() != 1) throw ConfigError("offline training runs on a single-RA environment");
    if (options.period_len < 1) throw ConfigError("period length must be >= 1");
    const int I = env.num_slices();
    const int K = env.num_resources();
    const Vector unit_capacity = Vector::Ones(K);

    TrainResult result;
    std::mt19937_64 rng(options.seed);
    ValidationSet validation;
    if (options.validation_every > 0) {
        if (options.validation_episodes < 1) throw ConfigError("validation needs at least one episode");
        validation = make_validation_set(sampler, options.validation_episodes, options.seed ^ 0x5eed5eedULL);
    }
    auto validate_now = [&] {
        if (!learner.ready()) return;
        const double score = greedy_validation(learner, layout, env, validation, options);
        if (!result.best_validation || score > *result.best_validation) {
            result.best_validation = score;
            result.best_step = result.steps;
            learner.keep_policy();
        }
    };
    std::uniform_real_distribution<double> initial_queue(0.0, std::max(0.0, options.initial_queue_max));

    while (result.steps < total_steps) {
        EnvState env_state = env.reset(rng());
        for (int i = 0; i < I; ++i) env_state.queues(i, 0) = options.initial_queue_max > 0.0 ? initial_queue(rng) : 0.0;
        const Vector coordination = sampler(rng);
        if (coordination.size() != I) throw ConfigError("coordination sampler returned the wrong length");

        double episode_reward = 0.0;
        for (int t = 0; t < options.period_len && result.steps < total_steps; ++t) {
            const AgentState state = make_agent_state(env_state.queues.col(0), coordination, options.scales, layout);
            const AgentAction action = learner.ready() ? learner.act(state, true) : learner.random_action();
            const Allocation alloc = action.materialize(env.ras().front().capacity);
            StepResult step = env.step(env_state, std::span<const Allocation>(&alloc, 1));
            const Allocation normalized{action.fractions};
            const double reward = shaped_reward(step.perf.values.col(0), normalized, coordination, options.rho,
                                                options.beta, unit_capacity, options.period_len);
            const AgentState next = make_agent_state(step.next.queues.col(0), coordination, options.scales, layout);
            learner.remember({state.values, action.flat(), reward, next.values});
            if (learner.update()) ++result.updates;
            episode_reward += reward;
            env_state = std::move(step.next);
            ++result.steps;
            if (options.validation_every > 0 && result.steps % options.validation_every == 0) validate_now();
        }
        result.episode_rewards.push_back(episode_reward);
    }
    if (options.validation_every > 0) {
        validate_now();  // the final policy competes too
        if (result.best_validation) learner.restore_policy();
    }
    return result;
}

ValidationSet make_validation_set(const CoordinationSampler& sampler, int episodes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ValidationSet set;
    for (int e = 0; e < episodes; ++e) {
        set.coordination.push_back(sampler(rng));
        set.env_seeds.push_back(rng());
    }
    return set;
}

double greedy_validation(Learner& learner, StateLayout layout, const Environment& env, const ValidationSet& set,
                         const TrainOptions& options) {
    if (set.coordination.empty()) throw ConfigError("empty validation set");
    const Vector unit_capacity = Vector::Ones(env.num_resources());
    double total = 0.0;
    for (std::size_t e = 0; e < set.coordination.size(); ++e) {
        EnvState state = env.reset(set.env_seeds[e]);
        for (int t = 0; t < options.period_len; ++t) {
            const AgentState s = make_agent_state(state.queues.col(0), set.coordination[e], options.scales, layout);
            const AgentAction action = learner.act(s, false);
            const Allocation alloc = action.materialize(env.ras().front().capacity);
            StepResult step = env.step(state, std::span<const Allocation>(&alloc, 1));
            total += shaped_reward(step.perf.values.col(0), Allocation{action.fractions}, set.coordination[e],
                                   options.rho, options.beta, unit_capacity, options.period_len);
            state = std::move(step.next);
        }
    }
    return total / static_cast<double>(set.coordination.size());
}

}  // namespace edgeslice
