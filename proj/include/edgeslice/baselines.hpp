#pragma once

#include "edgeslice/agent.hpp"
#include "edgeslice/core.hpp"

#include <memory>
#include <string>
#include <vector>

namespace edgeslice {

/// Traffic-aware split: every resource is shared in proportion to queue length.
/// All-zero queues fall back to an equal split.
Allocation taro(const Vector& queues, const Vector& capacity);

/// Input of the EdgeSlice-NT ablation: coordination only, no queue lengths.
AgentState edgeslice_nt_state(const Vector& coordination, const StateScales& scales);

/// Everything the oracle needs to evaluate one RA over a period with
/// deterministic arrivals at the mean rate.
struct OracleProblem {
    std::vector<SliceSpec> slices;
    RASpec ra;
    Vector arrival_rates;  // per slice, tasks per interval
    Vector queues;         // at the start of the period
    int period_len = 10;
    double rho = 1.0;
};

struct OracleOptions {
    double grid_step = 0.1;
    double max_enumeration = 1e7;  // joint feasible grid points
};

struct OracleDecision {
    Matrix fractions;  // I x K
    Vector perf_sum;   // per slice, predicted period sum of U
    double objective = 0.0;
    double evaluated = 0.0;  // number of joint grid points visited
};

/// Period performance sums per slice when `fractions` is held for the whole period.
Vector stationary_period_perf(const Matrix& fractions, const OracleProblem& problem);

/// sum_i [S_i - rho/2 (S_i - c_i)^2].
double oracle_objective(const Vector& perf_sum, const Vector& coordination, double rho);

/// Exhaustive maximizer of oracle_objective over the feasible fraction grid.
/// Ties keep the lexicographically smallest allocation (slice-major order).
OracleDecision oracle_agent(const Vector& coordination, const OracleProblem& problem,
                            const OracleOptions& options = {});

/// Common seam over everything that can drive one RA.
class Policy {
public:
    virtual ~Policy() = default;

    virtual std::string name() const = 0;
    /// Called once before the first interval of every coordination period.
    virtual void start_period(const Vector& /*queues*/, const Vector& /*coordination*/) {}
    virtual Allocation decide(const Vector& queues, const Vector& coordination, const RASpec& ra) = 0;
};

class TaroPolicy final : public Policy {
public:
    std::string name() const override { return "taro"; }
    Allocation decide(const Vector& queues, const Vector& coordination, const RASpec& ra) override;
};

/// Greedy (noise-free) actions of a trained agent. Coordination values are
/// clamped to the range the agent was trained on: a diverging dual must not
/// push the network into inputs it has never seen.
class AgentPolicy final : public Policy {
public:
    AgentPolicy(std::shared_ptr<DdpgAgent> agent, StateScales scales, double coordination_low,
                double coordination_high);

    std::string name() const override;
    Allocation decide(const Vector& queues, const Vector& coordination, const RASpec& ra) override;
    const DdpgAgent& agent() const { return *agent_; }

private:
    std::shared_ptr<DdpgAgent> agent_;
    StateScales scales_;
    double low_;
    double high_;
};

/// Solves the period problem once at the period start and holds that allocation.
class OraclePolicy final : public Policy {
public:
    OraclePolicy(std::vector<SliceSpec> slices, RASpec ra, Vector arrival_rates, int period_len, double rho,
                 OracleOptions options = {});

    std::string name() const override { return "oracle"; }
    void start_period(const Vector& queues, const Vector& coordination) override;
    Allocation decide(const Vector& queues, const Vector& coordination, const RASpec& ra) override;
    const OracleDecision& last_decision() const { return decision_; }

private:
    OracleProblem problem_;
    OracleOptions options_;
    OracleDecision decision_;
    bool planned_ = false;
};

}  // namespace edgeslice
