#pragma once

#include "edgeslice/agent.hpp"
#include "edgeslice/baselines.hpp"
#include "edgeslice/coordinator.hpp"
#include "edgeslice/env.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace edgeslice {

enum class PolicyKind { edgeslice, edgeslice_nt, taro, oracle };

std::string to_string(PolicyKind kind);
PolicyKind policy_from_string(const std::string& name);
bool is_learned(PolicyKind kind);
StateLayout layout_for(PolicyKind kind);

/// Training settings of the orchestration agents.
struct AgentSettings {
    DdpgConfig ddpg;
    long train_steps = 50'000;
    /// Coordination targets (z - y, summed over a period) are drawn uniformly in
    /// [coordination_low, coordination_high] during training.
    double coordination_low = -100.0;
    double coordination_high = 0.0;
    double initial_queue_max = 0.0;
    /// Keep the best greedy policy scored every validation_every steps (0 = off).
    long validation_every = 0;
    int validation_episodes = 16;
    StateScales scales;
};

/// Full training length, used by `train --full-scale`.
inline constexpr long full_scale_train_steps = 1'000'000;

struct CoordinationSettings {
    int max_iterations = 50;
    /// Primal and drift tolerances, relative to the performance scale.
    double tolerance = 1e-2;
    /// Absolute magnitude the tolerance refers to; 0 picks max_i |u_min_i| (at least 1).
    double performance_scale = 0.0;
    int window = 3;
    /// Periods averaged into the reported final performance.
    int evaluation_window = 10;
    /// Start every period from empty queues (stationary fixtures).
    bool reset_queues_each_period = false;
};

struct ServiceSettings {
    ServiceModel::Mode mode = ServiceModel::Mode::bottleneck;
    double granularity = 0.1;  // regression mode: grid of the fitted dataset
    int neighborhood = 1;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::uint64_t seed = 1;
    int num_resources = 3;
    int period_len = 10;
    double rho = 1.0;
    double beta = 20.0;
    std::vector<SliceSpec> slices;
    std::vector<RASpec> ras;
    std::vector<std::vector<TrafficSource>> traffic;  // [slice][ra]
    ServiceSettings service;
    PolicyKind policy = PolicyKind::edgeslice;
    AgentSettings agent;
    CoordinationSettings coordination;
    OracleOptions oracle;

    int num_slices() const { return static_cast<int>(slices.size()); }
    int num_ras() const { return static_cast<int>(ras.size()); }
    Vector u_min() const;
    double performance_scale() const;
};

/// Throws ConfigError naming the first inconsistency.
void validate(const ExperimentConfig& config);

/// Relative trace paths are resolved against `base_dir`.
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
/// Fully resolved configuration (trace files inlined) as JSON.
std::string config_to_json(const ExperimentConfig& config);

Environment make_environment(const ExperimentConfig& config);

/// Reads `interval_index,slice_id,ra_id,arrival_count` rows into one trace per
/// (slice, RA), indexed like `slice_ids` x `ra_ids`. Intervals missing from the
/// file count as zero arrivals. With target_mean > 0 every series is rescaled
/// to that mean.
std::vector<std::vector<TrafficSource>> ingest_trace(std::istream& in, const std::vector<int>& slice_ids,
                                                     const std::vector<int>& ra_ids, double target_mean, bool repeat);
std::vector<std::vector<TrafficSource>> ingest_trace(const std::filesystem::path& path,
                                                     const std::vector<int>& slice_ids, const std::vector<int>& ra_ids,
                                                     double target_mean, bool repeat);

/// Mixes `base` with `tags` into an independent seed.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

using ProgressFn = std::function<void(const std::string&)>;

struct TrainedAgents {
    StateLayout layout = StateLayout::full;
    std::vector<std::shared_ptr<DdpgAgent>> per_ra;
    /// RAs with identical profiles share one trained agent; group[j] is the
    /// index of the first RA of j's profile.
    std::vector<int> group;
    std::vector<TrainResult> curves;  // per RA, empty for RAs reusing a group
};

TrainedAgents train_agents(const ExperimentConfig& config, StateLayout layout, const ProgressFn& progress = {});

/// Reads ra_<id>.agent from `dir` for every RA.
TrainedAgents load_agents(const ExperimentConfig& config, StateLayout layout, const std::filesystem::path& dir);
void save_agents(const TrainedAgents& agents, const ExperimentConfig& config, const std::filesystem::path& dir);
void write_learning_curve(const TrainedAgents& agents, const ExperimentConfig& config, std::ostream& out);

/// One policy per RA. Agent policies need `agents`.
std::vector<std::unique_ptr<Policy>> make_policies(const ExperimentConfig& config, PolicyKind kind,
                                                   const TrainedAgents* agents = nullptr);

struct IntervalRecord {
    long period = 0;
    long interval = 0;
    int slice = 0;
    int ra = 0;
    double arrivals = 0.0;
    double departures = 0.0;
    double queue = 0.0;  // after service
    double performance = 0.0;
    Vector fractions;  // K
};

struct PeriodRecord {
    long period = 0;
    double system_performance = 0.0;
    Vector slice_performance;  // I
    double primal_residual = 0.0;
    double drift = 0.0;
};

struct RunResult {
    std::string policy;
    std::vector<PeriodRecord> periods;
    std::vector<IntervalRecord> intervals;
    std::vector<CoordinationRecord> coordination;
    Vector u_min;
    Vector slice_cumulative;  // I, over the whole run
    Vector ra_cumulative;     // J, over the whole run
    bool converged = false;
    long convergence_iteration = -1;
    /// Mean system performance per period over the last `evaluation_window` periods.
    double final_performance = 0.0;
    Vector final_slice_performance;  // same window, per slice
    Vector final_ra_performance;     // same window, per RA
    double wall_clock_seconds = 0.0;

    std::vector<double> system_performance() const;
};

/// The coordinated orchestration loop with fixed policies. Never throws on non-convergence.
RunResult run_orchestration(const ExperimentConfig& config, std::vector<std::unique_ptr<Policy>>& policies);

/// Writes config.json, periods.csv, intervals.csv and coordination.csv.
void write_run(const RunResult& result, const ExperimentConfig& config, const std::filesystem::path& dir);

/// Plot-ready per-period table rebuilt from a run directory's intervals.csv.
void write_report(const std::filesystem::path& run_dir, std::ostream& out);

struct SweepRow {
    std::string policy;
    int num_slices = 0;
    int num_ras = 0;
    double alpha = 0.0;  // 0 when alpha was not swept
    double system_performance = 0.0;
    double per_ra = 0.0;
    double per_slice = 0.0;
    bool converged = false;
};

struct SweepRequest {
    std::vector<PolicyKind> policies;
    std::vector<int> ra_counts;     // empty: keep the template
    std::vector<int> slice_counts;  // empty: keep the template
    std::vector<double> alphas;     // empty: keep the template
};

/// Resizes `base` to `num_slices` x `num_ras` by cycling its slice and RA
/// profiles (and the matching traffic) in order. Slice SLAs scale with
/// num_ras / base.num_ras() so the per-RA share of every u_min is unchanged.
ExperimentConfig resize_config(const ExperimentConfig& base, int num_slices, int num_ras);

/// Every combination of the requested counts, per policy. Agents are trained
/// per setting; identical profiles within a setting share one agent.
std::vector<SweepRow> scalability_sweep(const ExperimentConfig& base, const SweepRequest& request,
                                        const ProgressFn& progress = {});
void write_sweep(const std::vector<SweepRow>& rows, std::ostream& out);

}  // namespace edgeslice
