#include "edgeslice/env.hpp"

#include <doctest.h>

#include <cmath>

using namespace edgeslice;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

Environment one_queue(TrafficSource src, double coeff = 20.0) {
    return Environment({{0, -50.0, 2.0, Vector::Ones(3)}}, {{0, Vector::Ones(3), coeff}}, {{src}});
}

}  // namespace

TEST_SUITE("env") {

TEST_CASE("bottleneck service examples") {
    CHECK(bottleneck_service(vec({0.5, 0.5, 0.5}), vec({1, 1, 1}), 20.0) == doctest::Approx(10.0));
    CHECK(bottleneck_service(vec({1.0, 0.2, 1.0}), vec({1, 1, 1}), 20.0) == doctest::Approx(4.0));
    CHECK(bottleneck_service(vec({0.6, 0.6, 0.3}), vec({1, 1, 0.5}), 20.0) == doctest::Approx(12.0));
    CHECK(bottleneck_service(vec({1.0, 0.0, 1.0}), vec({1, 1, 1}), 20.0) == 0.0);
    CHECK_THROWS_AS(bottleneck_service(vec({1.0}), vec({1, 1}), 1.0), ConfigError);
}

TEST_CASE("bottleneck service is monotone in every component") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Vector w = vec({1.0, 0.4, 0.7});
    for (int trial = 0; trial < 500; ++trial) {
        Vector f = Vector::NullaryExpr(3, [&] { return u(rng); });
        const double before = bottleneck_service(f, w, 13.0);
        f(trial % 3) += 0.1 * u(rng);
        CHECK(bottleneck_service(f, w, 13.0) >= before);
    }
    // Whole capacity to one slice: coeff / max weight.
    CHECK(bottleneck_service(Vector::Ones(3), w, 13.0) == doctest::Approx(13.0 / 1.0));
    CHECK(bottleneck_service(Vector::Ones(3), vec({0.5, 0.25, 0.5}), 13.0) == doctest::Approx(26.0));
}

TEST_CASE("no service and no arrivals keeps the queue") {
    const Environment env = one_queue(TraceTraffic{{0.0}, true});
    EnvState s = env.reset(7);
    CHECK(s.queues.isZero(0.0));
    s.queues(0, 0) = 4.0;
    const Allocation none = Allocation::zeros(1, 3);
    const StepResult r = env.step(s, std::span<const Allocation>(&none, 1));
    CHECK(r.next.queues(0, 0) == 4.0);
    CHECK(r.perf.values(0, 0) == -16.0);
    CHECK(r.next.interval == 1);
}

TEST_CASE("saturating service drains the queue") {
    const Environment env = one_queue(TraceTraffic{{3.0}, true}, 50.0);
    EnvState s = env.reset(1);
    s.queues(0, 0) = 10.0;
    const Allocation all{Matrix::Ones(1, 3)};
    const StepResult r = env.step(s, std::span<const Allocation>(&all, 1));
    CHECK(r.next.queues(0, 0) == 0.0);
    CHECK(r.perf.values(0, 0) == 0.0);
    CHECK(r.departures(0, 0) == 13.0);
}

TEST_CASE("flow conservation and non-negative queues under random play") {
    const Vector w1 = vec({1, 1, 0.3}), w2 = vec({0.3, 0.3, 1});
    const Environment env({{0, -50, 2, w1}, {1, -50, 2, w2}}, {{0, vec({20, 100, 8}), 22}, {3, vec({10, 10, 10}), 15}},
                          {{PoissonTraffic{10}, PoissonTraffic{6}}, {TraceTraffic{{1, 5, 9}, true}, PoissonTraffic{12}}});
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    EnvState s = env.reset(99);
    for (int t = 0; t < 2000; ++t) {
        std::vector<Allocation> allocs;
        for (const auto& ra : env.ras()) {
            allocs.push_back(Allocation::from_fractions(Matrix::NullaryExpr(2, 3, [&] { return u(rng); }), ra.capacity));
        }
        const StepResult r = env.step(s, allocs);
        CHECK((r.next.queues.array() >= 0.0).all());
        CHECK((r.departures.array() >= 0.0).all());
        CHECK((r.departures.array() <= (s.queues + r.arrivals).array()).all());
        CHECK((r.next.queues - (s.queues + r.arrivals - r.departures)).cwiseAbs().maxCoeff() < 1e-9);
        s = r.next;
    }
}

TEST_CASE("poisson arrivals have the configured mean") {
    const Environment env = one_queue(PoissonTraffic{10.0});
    EnvState s = env.reset(2024);
    const Allocation all{Matrix::Ones(1, 3)};
    double total = 0.0;
    for (int t = 0; t < 10000; ++t) {
        const StepResult r = env.step(s, std::span<const Allocation>(&all, 1));
        total += r.arrivals(0, 0);
        s = r.next;
    }
    CHECK(total / 10000.0 >= 9.7);
    CHECK(total / 10000.0 <= 10.3);
}

TEST_CASE("reset seeds determine arrival sequences") {
    const Environment env = one_queue(PoissonTraffic{10.0});
    const Allocation none = Allocation::zeros(1, 3);
    auto arrivals = [&](std::uint64_t seed) {
        std::vector<double> seq;
        EnvState s = env.reset(seed);
        for (int t = 0; t < 100; ++t) {
            const StepResult r = env.step(s, std::span<const Allocation>(&none, 1));
            seq.push_back(r.arrivals(0, 0));
            s = r.next;
        }
        return seq;
    };
    CHECK(arrivals(7) == arrivals(7));
    CHECK(arrivals(7) != arrivals(8));
}

TEST_CASE("single-RA view keeps the RA's random stream") {
    const Environment env({{0, -50, 2, Vector::Ones(3)}}, {{0, Vector::Ones(3), 20}, {1, Vector::Ones(3), 20}},
                          {{PoissonTraffic{10}, PoissonTraffic{10}}});
    const Environment solo = env.single_ra(1);
    CHECK(solo.num_ras() == 1);
    CHECK(solo.ras().front().id == 1);
    EnvState full = env.reset(3), part = solo.reset(3);
    std::vector<Allocation> two(2, Allocation::zeros(1, 3));
    const Allocation one = Allocation::zeros(1, 3);
    for (int t = 0; t < 50; ++t) {
        const StepResult a = env.step(full, two);
        const StepResult b = solo.step(part, std::span<const Allocation>(&one, 1));
        CHECK(a.arrivals(0, 1) == b.arrivals(0, 0));
        full = a.next;
        part = b.next;
    }
    CHECK_THROWS_AS(env.single_ra(2), ConfigError);
}

TEST_CASE("traces wrap when repeating and fall silent otherwise") {
    std::vector<double> day(24);
    for (int h = 0; h < 24; ++h) day[static_cast<std::size_t>(h)] = 5.0 + h;
    const Allocation none = Allocation::zeros(1, 3);
    for (bool repeat : {true, false}) {
        const Environment env = one_queue(TraceTraffic{day, repeat});
        EnvState s = env.reset(0);
        std::vector<double> seen;
        for (int t = 0; t < 30; ++t) {
            const StepResult r = env.step(s, std::span<const Allocation>(&none, 1));
            seen.push_back(r.arrivals(0, 0));
            s = r.next;
        }
        CHECK(seen[0] == 5.0);
        CHECK(seen[24] == (repeat ? seen[0] : 0.0));
    }
    CHECK(mean_rate(TraceTraffic{{2, 4, 6}, true}) == 4.0);
    CHECK_THROWS_AS(validate(TrafficSource{TraceTraffic{{}, true}}), ConfigError);
    CHECK_THROWS_AS(validate(TrafficSource{TraceTraffic{{1, -1}, true}}), ConfigError);
    CHECK_THROWS_AS(validate(TrafficSource{PoissonTraffic{0.0}}), ConfigError);
}

TEST_CASE("over-subscribed resources are shared pro rata") {
    Allocation a{Matrix(2, 2)};
    a.amounts << 6, 2, 6, 3;  // first column asks for 12 of 8
    const Matrix f = effective_fractions(a, vec({8, 10}));
    CHECK(f(0, 0) == doctest::Approx(0.5));
    CHECK(f(1, 0) == doctest::Approx(0.5));
    CHECK(f(0, 1) == doctest::Approx(0.2));
    CHECK(f(1, 1) == doctest::Approx(0.3));
}

TEST_CASE("regression service mode follows the fitted surface") {
    const Vector w = vec({1, 0.5});
    auto truth = [w](const Vector& f) { return bottleneck_service(f, w, 1.0); };
    std::vector<RegressionOracle> oracles{RegressionOracle(build_grid_dataset(truth, 2, 0.1))};
    const ServiceModel model = ServiceModel::regression(std::move(oracles));
    const SliceSpec slice{0, -50, 2, w};
    const RASpec ra{0, Vector::Ones(2), 20.0};
    // On grid points the fit reproduces the ground truth.
    CHECK(model.service(vec({0.4, 0.4}), 0, slice, ra) == doctest::Approx(20.0 * 0.4).epsilon(1e-9));
    CHECK(model.service(vec({0.0, 0.4}), 0, slice, ra) == 0.0);
    CHECK_THROWS_AS(model.service(vec({0.4, 0.4}), 1, slice, ra), ConfigError);
    CHECK_THROWS_AS(Environment({slice, {1, -50, 2, w}}, {ra}, {{PoissonTraffic{1}}, {PoissonTraffic{1}}},
                                ServiceModel::regression({RegressionOracle(build_grid_dataset(truth, 2, 0.5))})),
                    ConfigError);
}

}
