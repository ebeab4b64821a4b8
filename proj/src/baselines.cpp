#include "edgeslice/baselines.hpp"

#include "edgeslice/env.hpp"
#include "edgeslice/regression.hpp"  // grid_steps

#include <cmath>
#include <limits>

namespace edgeslice {

Allocation taro(const Vector& queues, const Vector& capacity) {
    const Eigen::Index I = queues.size();
    if (I == 0) throw ConfigError("taro: no slices");
    if ((queues.array() < 0.0).any() || !queues.allFinite()) {
        throw ConfigError("taro: queue lengths must be finite and non-negative");
    }
    const double total = queues.sum();
    Vector share = total > 0.0 ? Vector(queues / total) : Vector::Constant(I, 1.0 / static_cast<double>(I));
    return {share * capacity.transpose()};
}

AgentState edgeslice_nt_state(const Vector& coordination, const StateScales& scales) {
    return make_agent_state(Vector(), coordination, scales, StateLayout::coordination_only);
}

Vector stationary_period_perf(const Matrix& fractions, const OracleProblem& problem) {
    const auto I = static_cast<Eigen::Index>(problem.slices.size());
    Vector sums = Vector::Zero(I);
    for (Eigen::Index i = 0; i < I; ++i) {
        const SliceSpec& s = problem.slices[static_cast<std::size_t>(i)];
        const double served = bottleneck_service(fractions.row(i).transpose(), s.demand_weights,
                                                 problem.ra.service_coeff);
        double q = problem.queues(i);
        for (int t = 0; t < problem.period_len; ++t) {
            q = std::max(0.0, q + problem.arrival_rates(i) - served);
            sums(i) += slice_performance(q, s.alpha);
        }
    }
    return sums;
}

double oracle_objective(const Vector& perf_sum, const Vector& coordination, double rho) {
    return (perf_sum.array() - 0.5 * rho * (perf_sum - coordination).array().square()).sum();
}

namespace {

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

struct Search {
    int I = 0;
    int K = 0;
    int units = 0;
    double rho = 1.0;
    const Vector* coordination = nullptr;
    std::vector<std::vector<int>> points;      // every grid point, row-major
    std::vector<std::vector<double>> values;   // per slice, per point: period sum of U
    std::vector<int> choice;
    std::vector<int> remaining;
    double partial = 0.0;
    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> best_choice;
    double visited = 0.0;

    void dfs(int i) {
        if (i == I) {
            visited += 1.0;
            if (partial > best) {
                best = partial;
                best_choice = choice;
            }
            return;
        }
        for (std::size_t p = 0; p < points.size(); ++p) {
            const auto& pt = points[p];
            bool fits = true;
            for (int k = 0; k < K; ++k) {
                if (pt[static_cast<std::size_t>(k)] > remaining[static_cast<std::size_t>(k)]) {
                    fits = false;
                    break;
                }
            }
            if (!fits) continue;
            const double s = values[static_cast<std::size_t>(i)][p];
            const double d = s - (*coordination)(i);
            const double term = s - 0.5 * rho * d * d;
            for (int k = 0; k < K; ++k) remaining[static_cast<std::size_t>(k)] -= pt[static_cast<std::size_t>(k)];
            choice[static_cast<std::size_t>(i)] = static_cast<int>(p);
            partial += term;
            dfs(i + 1);
            partial -= term;
            for (int k = 0; k < K; ++k) remaining[static_cast<std::size_t>(k)] += pt[static_cast<std::size_t>(k)];
        }
    }
};

}  // namespace

OracleDecision oracle_agent(const Vector& coordination, const OracleProblem& problem, const OracleOptions& options) {
    const int I = static_cast<int>(problem.slices.size());
    if (I == 0) throw ConfigError("oracle: no slices");
    const int K = static_cast<int>(problem.ra.capacity.size());
    if (coordination.size() != I || problem.arrival_rates.size() != I || problem.queues.size() != I) {
        throw ConfigError("oracle: coordination, arrival rates and queues need one entry per slice");
    }
    if (problem.period_len < 1) throw ConfigError("oracle: period length must be >= 1");
    const int units = grid_steps(options.grid_step);

    // Joint points with every column sum <= units: C(units + I, I) per resource.
    const double joint = std::pow(binomial(units + I, I), K);
    if (joint > options.max_enumeration) {
        throw ConfigError("oracle: " + std::to_string(static_cast<long long>(joint)) +
                          " joint grid points exceed the enumeration cap");
    }

    Search search;
    search.I = I;
    search.K = K;
    search.units = units;
    search.rho = problem.rho;
    search.coordination = &coordination;

    // Odometer over {0..units}^K, last resource fastest.
    std::vector<int> pt(static_cast<std::size_t>(K), 0);
    for (;;) {
        search.points.push_back(pt);
        int k = K - 1;
        while (k >= 0 && pt[static_cast<std::size_t>(k)] == units) pt[static_cast<std::size_t>(k--)] = 0;
        if (k < 0) break;
        ++pt[static_cast<std::size_t>(k)];
    }

    // The period sum of slice i depends only on its own row.
    search.values.assign(static_cast<std::size_t>(I), std::vector<double>(search.points.size()));
    for (int i = 0; i < I; ++i) {
        OracleProblem single = problem;
        single.slices = {problem.slices[static_cast<std::size_t>(i)]};
        single.arrival_rates = Vector::Constant(1, problem.arrival_rates(i));
        single.queues = Vector::Constant(1, problem.queues(i));
        for (std::size_t p = 0; p < search.points.size(); ++p) {
            Matrix f(1, K);
            for (int k = 0; k < K; ++k) f(0, k) = search.points[p][static_cast<std::size_t>(k)] / static_cast<double>(units);
            search.values[static_cast<std::size_t>(i)][p] = stationary_period_perf(f, single)(0);
        }
    }

    search.choice.assign(static_cast<std::size_t>(I), 0);
    search.remaining.assign(static_cast<std::size_t>(K), units);
    search.dfs(0);

    OracleDecision d;
    d.fractions = Matrix::Zero(I, K);
    for (int i = 0; i < I; ++i) {
        const auto& pt = search.points[static_cast<std::size_t>(search.best_choice[static_cast<std::size_t>(i)])];
        for (int k = 0; k < K; ++k) d.fractions(i, k) = pt[static_cast<std::size_t>(k)] / static_cast<double>(units);
    }
    d.perf_sum = stationary_period_perf(d.fractions, problem);
    d.objective = search.best;
    d.evaluated = search.visited;
    return d;
}

Allocation TaroPolicy::decide(const Vector& queues, const Vector& /*coordination*/, const RASpec& ra) {
    return taro(queues, ra.capacity);
}

AgentPolicy::AgentPolicy(std::shared_ptr<DdpgAgent> agent, StateScales scales, double coordination_low,
                         double coordination_high)
    : agent_(std::move(agent)), scales_(scales), low_(coordination_low), high_(coordination_high) {
    if (!agent_) throw ConfigError("agent policy needs an agent");
    if (!(low_ <= high_)) throw ConfigError("agent policy: empty coordination range");
}

std::string AgentPolicy::name() const {
    return agent_->layout() == StateLayout::full ? "edgeslice" : "edgeslice-nt";
}

Allocation AgentPolicy::decide(const Vector& queues, const Vector& coordination, const RASpec& ra) {
    const Vector clamped = coordination.cwiseMax(low_).cwiseMin(high_);
    const AgentState state = make_agent_state(queues, clamped, scales_, agent_->layout());
    return agent_->act(state, false).materialize(ra.capacity);
}

OraclePolicy::OraclePolicy(std::vector<SliceSpec> slices, RASpec ra, Vector arrival_rates, int period_len,
                           double rho, OracleOptions options)
    : options_(options) {
    problem_.slices = std::move(slices);
    problem_.ra = std::move(ra);
    problem_.arrival_rates = std::move(arrival_rates);
    problem_.period_len = period_len;
    problem_.rho = rho;
}

void OraclePolicy::start_period(const Vector& queues, const Vector& coordination) {
    problem_.queues = queues;
    decision_ = oracle_agent(coordination, problem_, options_);
    planned_ = true;
}

Allocation OraclePolicy::decide(const Vector& /*queues*/, const Vector& /*coordination*/, const RASpec& ra) {
    if (!planned_) throw std::logic_error("oracle policy: decide() before start_period()");
    return Allocation::from_fractions(decision_.fractions, ra.capacity);
}

}  // namespace edgeslice
