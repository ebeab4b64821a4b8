#include "edgeslice/agent.hpp"

#include <doctest.h>

#include <sstream>

using namespace edgeslice;

namespace {

DdpgConfig small_config() {
    DdpgConfig c;
    c.hidden = {16, 16};
    c.batch_size = 8;
    c.replay_capacity = 1000;
    return c;
}

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

Environment two_slice_env(double coeff = 22.0) {
    return Environment({{0, -50, 2, vec({1, 1, 0.3})}, {1, -50, 2, vec({0.3, 0.3, 1})}},
                       {{0, Vector::Ones(3), coeff}}, {{PoissonTraffic{10}}, {PoissonTraffic{10}}});
}

}  // namespace

TEST_SUITE("agent") {

TEST_CASE("state layouts") {
    const StateScales scales{100.0, 50.0};
    const AgentState full = make_agent_state(vec({10, 30}), vec({-25, -5}), scales);
    CHECK(full.size() == 4);
    CHECK(full.values(0) == 0.1);
    CHECK(full.values(3) == -0.1);
    const AgentState nt = make_agent_state(vec({10, 30}), vec({-25, -5}), scales, StateLayout::coordination_only);
    CHECK(nt.size() == 2);
    CHECK(nt.values == full.values.tail(2));
    CHECK(state_size(3, StateLayout::full) == 6);
    CHECK(state_size(3, StateLayout::coordination_only) == 3);
    CHECK_THROWS_AS(make_agent_state(vec({1}), vec({1, 2}), scales), ConfigError);
}

TEST_CASE("actions flatten slice-major") {
    Matrix f(2, 3);
    f << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
    const AgentAction a{f};
    CHECK(a.flat() == vec({0.1, 0.2, 0.3, 0.4, 0.5, 0.6}));
    CHECK(AgentAction::from_flat(a.flat(), 2, 3).fractions == f);
    CHECK(a.materialize(vec({10, 20, 30})).amounts(1, 2) == doctest::Approx(18.0));
    CHECK_THROWS_AS(AgentAction::from_flat(vec({1, 2}), 2, 3), ConfigError);
}

TEST_CASE("shaped reward") {
    const Vector cap = Vector::Ones(1);
    Allocation feasible{Matrix::Constant(1, 1, 0.5)};
    // On target: exactly the performance sum.
    CHECK(shaped_reward(vec({-4}), feasible, vec({-40}), 1.0, 20.0, cap, 10) == -4.0);
    // rho = 1, target/T = -2: -4 - 0.5 * 4.
    CHECK(shaped_reward(vec({-4}), feasible, vec({-20}), 1.0, 20.0, cap, 10) == -6.0);
    Allocation over{Matrix::Constant(1, 1, 1.1)};
    CHECK(shaped_reward(vec({-4}), over, vec({-20}), 1.0, 20.0, cap, 10) == doctest::Approx(-8.0).epsilon(1e-12));
    // Anything off target or infeasible is strictly worse.
    CHECK(shaped_reward(vec({-4, -1}), Allocation{Matrix::Constant(2, 1, 0.5)}, vec({-40, -9}), 1.0, 20.0, cap, 10) <
          -5.0);
}

TEST_CASE("replay memory") {
    ReplayMemory mem(100);
    std::mt19937_64 rng(12345);
    CHECK_THROWS_AS(mem.sample_indices(1, rng), ConfigError);
    for (int n = 0; n < 150; ++n) mem.push({Vector::Constant(1, n), Vector::Zero(1), double(n), Vector::Zero(1)});
    CHECK(mem.size() == 100);
    // Oldest entries were overwritten in ring order.
    CHECK(mem.at(0).reward == 100.0);
    CHECK(mem.at(49).reward == 149.0);
    CHECK(mem.at(50).reward == 50.0);

    std::vector<int> hits(100, 0);
    for (int draw = 0; draw < 1000; ++draw) {
        for (auto i : mem.sample_indices(100, rng)) ++hits[i];
    }
    const double expected = 1000.0, sd = std::sqrt(100'000 * 0.01 * 0.99);
    double chi2 = 0.0;
    for (int h : hits) {
        CHECK(std::abs(h - expected) <= 3.0 * sd);
        chi2 += (h - expected) * (h - expected) / expected;
    }
    CHECK(chi2 < 148.2);  // 99 dof, p = 0.001
}

TEST_CASE("exploration noise") {
    ExplorationNoise noise(1.0, 0.9999);
    std::mt19937_64 rng(8);
    const Vector s = noise.sample(10'000, rng);
    const double mean = s.mean();
    const double sd = std::sqrt((s.array() - mean).square().sum() / (s.size() - 1));
    CHECK(sd >= 0.97);
    CHECK(sd <= 1.03);
    for (int n = 0; n < 10; ++n) noise.decay();
    CHECK(noise.std() == doctest::Approx(std::pow(0.9999, 10)));
    CHECK_THROWS_AS(ExplorationNoise(-1.0, 0.5), ConfigError);
}

TEST_CASE("acting") {
    DdpgAgent agent(2, 3, StateLayout::full, small_config(), 1);
    for (auto& layer : agent.actor().layers()) {
        layer.weights.setZero();
        layer.bias.setZero();
    }
    const AgentState s = make_agent_state(vec({5, 7}), vec({-10, -20}), {});
    CHECK(agent.act(s, false).fractions.isApproxToConstant(0.5, 0.0));

    DdpgAgent fresh(2, 3, StateLayout::full, small_config(), 2);
    CHECK(fresh.act(s, false).fractions == fresh.act(s, false).fractions);
    for (int n = 0; n < 200; ++n) {
        const auto a = fresh.act(s, true);
        CHECK((a.fractions.array() >= 0.0).all());
        CHECK((a.fractions.array() <= 1.0).all());
    }
    CHECK_THROWS_AS(fresh.act(AgentState{vec({1}), StateLayout::full}, false), ConfigError);
}

TEST_CASE("critic loss and targets") {
    DdpgConfig cfg = small_config();
    cfg.gamma = 0.5;
    cfg.batch_size = 1;
    DdpgAgent agent(1, 1, StateLayout::coordination_only, cfg, 3);
    // Zero hidden weights: every critic reduces to its output bias.
    for (auto* net : {&agent.critic(), &agent.critic_target()}) {
        for (auto& layer : net->layers()) {
            layer.weights.setZero();
            layer.bias.setZero();
        }
    }
    agent.critic().layers().back().bias(0) = 1.5;
    agent.critic_target().layers().back().bias(0) = -2.0;
    agent.remember({vec({0.3}), vec({0.6}), 4.0, vec({0.1})});
    const std::vector<std::size_t> batch{0};
    const double g = 4.0 + 0.5 * -2.0;
    CHECK(agent.bellman_targets(batch)(0) == doctest::Approx(g));
    CHECK(agent.critic_loss(batch) == doctest::Approx((g - 1.5) * (g - 1.5)));

    agent.critic().layers().back().bias(0) = g;
    CHECK(agent.critic_loss(batch) == doctest::Approx(0.0));

    // Targets only read the target networks.
    const Vector before = agent.bellman_targets(batch);
    agent.critic().layers().back().bias(0) = 99.0;
    agent.actor().layers().back().bias.setConstant(3.0);
    CHECK(agent.bellman_targets(batch) == before);

    DdpgConfig myopic = cfg;
    myopic.gamma = 0.0;
    DdpgAgent m(1, 1, StateLayout::coordination_only, myopic, 4);
    m.remember({vec({0.3}), vec({0.6}), -7.25, vec({0.1})});
    CHECK(m.bellman_targets(batch)(0) == -7.25);
}

TEST_CASE("update mechanics") {
    DdpgAgent agent(2, 3, StateLayout::full, small_config(), 5);
    CHECK_FALSE(agent.ready());
    CHECK_FALSE(agent.update().has_value());
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 0; n < 8; ++n) {
        agent.remember({Vector::NullaryExpr(4, [&] { return u(rng); }), Vector::NullaryExpr(6, [&] { return u(rng); }),
                        -u(rng), Vector::NullaryExpr(4, [&] { return u(rng); })});
    }
    REQUIRE(agent.ready());
    const nn::Mlp old_target = agent.critic_target();
    const double std_before = agent.noise().std();
    REQUIRE(agent.update().has_value());
    CHECK(agent.updates() == 1);
    CHECK(agent.noise().std() == doctest::Approx(std_before * 0.9999));
    for (std::size_t l = 0; l < old_target.layers().size(); ++l) {
        const Matrix& a = old_target.layers()[l].weights;
        const Matrix& b = agent.critic().layers()[l].weights;
        const Matrix& t = agent.critic_target().layers()[l].weights;
        CHECK((t.array() >= a.cwiseMin(b).array() - 1e-15).all());
        CHECK((t.array() <= a.cwiseMax(b).array() + 1e-15).all());
    }
}

TEST_CASE("actor step follows the finite-difference ascent direction") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int agree = 0;
    for (int trial = 0; trial < 100; ++trial) {
        DdpgConfig cfg = small_config();
        cfg.critic_lr = 1e-12;  // critic effectively frozen
        DdpgAgent agent(1, 2, StateLayout::full, cfg, 1000 + trial);
        const Vector s = Vector::NullaryExpr(2, [&] { return u(rng); });
        for (int n = 0; n < cfg.batch_size; ++n) agent.remember({s, Vector::Constant(2, 0.5), 0.0, s});

        auto objective = [&](const nn::Mlp& actor) {
            Vector in(4);
            in << s, actor.forward(s);
            return agent.critic().forward(in)(0);
        };
        // Finite-difference gradient of Q(s, mu(s)) over the actor's output layer.
        nn::Mlp probe = agent.actor();
        auto& w = probe.layers().back().weights;
        Matrix fd(w.rows(), w.cols());
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                const double keep = w(r, c);
                w(r, c) = keep + 1e-6;
                const double up = objective(probe);
                w(r, c) = keep - 1e-6;
                const double down = objective(probe);
                w(r, c) = keep;
                fd(r, c) = (up - down) / 2e-6;
            }
        }
        const Matrix before = agent.actor().layers().back().weights;
        agent.update();
        const Matrix step = agent.actor().layers().back().weights - before;
        if ((step.array() * fd.array()).sum() > 0.0) ++agree;
    }
    CHECK(agree >= 99);
}

TEST_CASE("checkpoints") {
    DdpgAgent agent(2, 3, StateLayout::full, small_config(), 9);
    std::stringstream buf;
    agent.save(buf);
    DdpgAgent other(2, 3, StateLayout::full, small_config(), 10);
    other.load(buf);
    const AgentState s = make_agent_state(vec({1, 2}), vec({-3, -4}), {});
    CHECK(other.act(s, false).fractions == agent.act(s, false).fractions);
    std::stringstream again;
    other.save(again);
    std::stringstream first;
    agent.save(first);
    CHECK(again.str() == first.str());

    std::stringstream buf2(first.str());
    DdpgAgent nt(2, 3, StateLayout::coordination_only, small_config(), 9);
    CHECK_THROWS_AS(nt.load(buf2), ConfigError);
}

TEST_CASE("offline training") {
    const Environment env = two_slice_env();
    TrainOptions opt;
    opt.seed = 4;
    DdpgAgent untouched(2, 3, StateLayout::full, small_config(), 1);
    std::stringstream before;
    untouched.save(before);
    const TrainResult none = train_offline(untouched, StateLayout::full, env, uniform_coordination(2, -50, 0), 0, opt);
    CHECK(none.steps == 0);
    CHECK(none.episode_rewards.empty());
    std::stringstream after;
    untouched.save(after);
    CHECK(before.str() == after.str());

    auto run = [&] {
        DdpgAgent a(2, 3, StateLayout::full, small_config(), 1);
        return train_offline(a, StateLayout::full, env, uniform_coordination(2, -50, 0), 300, opt);
    };
    const TrainResult r1 = run(), r2 = run();
    CHECK(r1.steps == 300);
    CHECK(r1.episode_rewards.size() == 30);
    CHECK(r1.updates == 300 - 7);  // updates start once a batch is stored
    CHECK(r1.episode_rewards == r2.episode_rewards);
    CHECK_THROWS_AS(uniform_coordination(2, 1, 0), ConfigError);
}

TEST_CASE("validation keeps the best greedy policy") {
    const Environment env = two_slice_env();
    const auto sampler = uniform_coordination(2, -50, 0);
    TrainOptions opt;
    opt.seed = 4;
    opt.validation_every = 50;
    opt.validation_episodes = 4;
    DdpgAgent agent(2, 3, StateLayout::full, small_config(), 1);
    const TrainResult r = train_offline(agent, StateLayout::full, env, sampler, 400, opt);
    REQUIRE(r.best_validation);
    CHECK(r.best_step >= 50);
    CHECK(r.best_step <= 400);
    CHECK(r.best_step % 50 == 0);

    const ValidationSet set = make_validation_set(sampler, 4, opt.seed ^ 0x5eed5eedULL);
    CHECK(greedy_validation(agent, StateLayout::full, env, set, opt) == doctest::Approx(*r.best_validation).epsilon(1e-12));

    // keep/restore round-trips the greedy policy
    const AgentState s = make_agent_state(vec({1, 2}), vec({-3, -4}), {});
    const Vector kept = agent.act(s, false).fractions;
    agent.keep_policy();
    for (int k = 0; k < 20; ++k) agent.update();
    agent.restore_policy();
    CHECK(agent.act(s, false).fractions == kept);

    TrainOptions bad = opt;
    bad.validation_episodes = 0;
    CHECK_THROWS_AS(train_offline(agent, StateLayout::full, env, sampler, 10, bad), ConfigError);
    CHECK_THROWS_AS(greedy_validation(agent, StateLayout::full, env, ValidationSet{}, opt), ConfigError);
}

}

TEST_SUITE("agent-slow") {

TEST_CASE("desk-scale training makes progress") {
    const Environment env = two_slice_env();
    DdpgConfig cfg;
    cfg.batch_size = 64;
    cfg.symlog_rewards = true;
    cfg.preactivation_l2 = 1e-3;
    DdpgAgent agent(2, 3, StateLayout::full, cfg, 21);
    TrainOptions opt;
    opt.seed = 22;
    const TrainResult r = train_offline(agent, StateLayout::full, env, uniform_coordination(2, -50, 0), 50'000, opt);
    const std::size_t n = r.episode_rewards.size(), tenth = n / 10;
    double first = 0.0, last = 0.0;
    for (std::size_t e = 0; e < tenth; ++e) {
        first += r.episode_rewards[e] / tenth;
        last += r.episode_rewards[n - 1 - e] / tenth;
    }
    MESSAGE("mean episode reward first 10%: " << first << ", last 10%: " << last);
    CHECK(last > first);
}

}
