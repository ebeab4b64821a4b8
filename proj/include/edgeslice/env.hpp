#pragma once

#include "edgeslice/core.hpp"
#include "edgeslice/regression.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <variant>
#include <vector>

namespace edgeslice {

struct PoissonTraffic {
    double rate = 0.0;
};

/// Deterministic per-interval arrival counts. Without `repeat` the source is
/// silent once the series is exhausted.
struct TraceTraffic {
    std::vector<double> series;
    bool repeat = true;
};

using TrafficSource = std::variant<PoissonTraffic, TraceTraffic>;

void validate(const TrafficSource& source);
double mean_rate(const TrafficSource& source);

/// coeff * min_k(fraction_k / weight_k); zero as soon as one fraction is zero.
double bottleneck_service(const Vector& fractions, const Vector& weights, double coeff);

/// Capacity fractions actually delivered: an over-subscribed resource is
/// shared pro rata so that its column sums to exactly 1.
Matrix effective_fractions(const Allocation& alloc, const Vector& capacity);

/// Maps a slice's capacity fractions in one RA to the tasks it can serve in an interval.
class ServiceModel {
public:
    enum class Mode { bottleneck, regression };

    static ServiceModel bottleneck() { return ServiceModel(); }
    /// One oracle per slice in environment order, fitted on the unit-coefficient bottleneck surface of
    /// that slice; predictions are scaled by the RA's service coefficient.
    static ServiceModel regression(std::vector<RegressionOracle> per_slice);

    Mode mode() const { return mode_; }
    std::size_t oracle_count() const { return oracles_.size(); }
    /// `slice_index` is the slice's position in the environment (selects the oracle).
    double service(const Vector& fractions, std::size_t slice_index, const SliceSpec& slice, const RASpec& ra) const;

private:
    ServiceModel() = default;

    Mode mode_ = Mode::bottleneck;
    std::vector<RegressionOracle> oracles_;
};

struct EnvState {
    Matrix queues;  // I x J, tasks
    long interval = 0;
    std::uint64_t seed = 0;
    std::vector<std::mt19937_64> rngs;  // one stream per RA
};

struct StepResult {
    EnvState next;
    PerfMatrix perf;
    Matrix arrivals;
    Matrix departures;
};

/// Discrete-time fluid-queue network: one FIFO queue per (slice, RA).
class Environment {
public:
    /// `traffic[i][j]` drives slice i in RA j.
    Environment(std::vector<SliceSpec> slices, std::vector<RASpec> ras,
                std::vector<std::vector<TrafficSource>> traffic,
                ServiceModel service = ServiceModel::bottleneck());

    int num_slices() const { return static_cast<int>(slices_.size()); }
    int num_ras() const { return static_cast<int>(ras_.size()); }
    int num_resources() const { return num_resources_; }
    const std::vector<SliceSpec>& slices() const { return slices_; }
    const std::vector<RASpec>& ras() const { return ras_; }
    const std::vector<std::vector<TrafficSource>>& traffic() const { return traffic_; }
    const ServiceModel& service_model() const { return service_; }

    EnvState reset(std::uint64_t seed) const;

    /// Arrivals are drawn first, then service is applied to queue + arrivals.
    StepResult step(const EnvState& state, std::span<const Allocation> allocs) const;

    /// The same network restricted to RA `ra`.
    Environment single_ra(int ra) const;

private:
    double draw_arrivals(const TrafficSource& source, long interval, std::mt19937_64& rng) const;

    std::vector<SliceSpec> slices_;
    std::vector<RASpec> ras_;
    std::vector<std::vector<TrafficSource>> traffic_;
    ServiceModel service_;
    int num_resources_ = 0;
};

}  // namespace edgeslice
