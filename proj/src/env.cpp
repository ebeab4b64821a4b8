#include "edgeslice/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace edgeslice {

void validate(const TrafficSource& source) {
    std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, PoissonTraffic>) {
                if (!(s.rate > 0.0) || !std::isfinite(s.rate)) {
                    throw ConfigError("poisson traffic needs a positive finite rate");
                }
            } else {
                if (s.series.empty()) throw ConfigError("trace traffic series is empty");
                for (double v : s.series) {
                    if (!(v >= 0.0) || !std::isfinite(v)) {
                        throw ConfigError("trace traffic entries must be finite and non-negative");
                    }
                }
            }
        },
        source);
}

double mean_rate(const TrafficSource& source) {
    if (const auto* p = std::get_if<PoissonTraffic>(&source)) return p->rate;
    const auto& t = std::get<TraceTraffic>(source);
    if (t.series.empty()) return 0.0;
    return std::accumulate(t.series.begin(), t.series.end(), 0.0) / static_cast<double>(t.series.size());
}

double bottleneck_service(const Vector& fractions, const Vector& weights, double coeff) {
    if (fractions.size() != weights.size()) {
        throw ConfigError("bottleneck service: fraction/weight length mismatch");
    }
    double limit = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < fractions.size(); ++k) {
        if (fractions(k) <= 0.0) return 0.0;
        limit = std::min(limit, fractions(k) / weights(k));
    }
    return coeff * limit;
}

Matrix effective_fractions(const Allocation& alloc, const Vector& capacity) {
    Matrix f = alloc.fractions(capacity);
    for (Eigen::Index k = 0; k < f.cols(); ++k) {
        const double total = f.col(k).sum();
        if (total > 1.0) f.col(k) /= total;
    }
    return f;
}

ServiceModel ServiceModel::regression(std::vector<RegressionOracle> per_slice) {
    ServiceModel model;
    model.mode_ = Mode::regression;
    model.oracles_ = std::move(per_slice);
    return model;
}

double ServiceModel::service(const Vector& fractions, std::size_t slice_index, const SliceSpec& slice,
                             const RASpec& ra) const {
    if (mode_ == Mode::bottleneck) {
        return bottleneck_service(fractions, slice.demand_weights, ra.service_coeff);
    }
    if (slice_index >= oracles_.size()) {
        throw ConfigError("regression service model has no oracle for slice " + std::to_string(slice.id));
    }
    if ((fractions.array() <= 0.0).any()) return 0.0;
    const double rate = oracles_[slice_index].predict(fractions);
    return std::max(0.0, ra.service_coeff * rate);
}

Environment::Environment(std::vector<SliceSpec> slices, std::vector<RASpec> ras,
                         std::vector<std::vector<TrafficSource>> traffic, ServiceModel service)
    : slices_(std::move(slices)), ras_(std::move(ras)), traffic_(std::move(traffic)), service_(std::move(service)) {
    if (slices_.empty() || ras_.empty()) throw ConfigError("environment needs at least one slice and one RA");
    num_resources_ = static_cast<int>(ras_.front().capacity.size());
    for (const auto& s : slices_) validate(s, num_resources_);
    for (const auto& r : ras_) validate(r, num_resources_);
    if (traffic_.size() != slices_.size()) throw ConfigError("traffic table needs one row per slice");
    for (const auto& row : traffic_) {
        if (row.size() != ras_.size()) throw ConfigError("traffic table needs one column per RA");
        for (const auto& src : row) validate(src);
    }
    if (service_.mode() == ServiceModel::Mode::regression && service_.oracle_count() != slices_.size()) {
        throw ConfigError("regression service model needs one oracle per slice");
    }
}

EnvState Environment::reset(std::uint64_t seed) const {
    EnvState state;
    state.queues = Matrix::Zero(num_slices(), num_ras());
    state.interval = 0;
    state.seed = seed;
    state.rngs.reserve(ras_.size());
    for (std::size_t j = 0; j < ras_.size(); ++j) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(ras_[j].id), 0x5eedu};
        state.rngs.emplace_back(seq);
    }
    return state;
}

double Environment::draw_arrivals(const TrafficSource& source, long interval, std::mt19937_64& rng) const {
    if (const auto* p = std::get_if<PoissonTraffic>(&source)) {
        std::poisson_distribution<long> dist(p->rate);
        return static_cast<double>(dist(rng));
    }
    const auto& t = std::get<TraceTraffic>(source);
    const auto n = static_cast<long>(t.series.size());
    if (t.repeat) return t.series[static_cast<std::size_t>(interval % n)];
    return interval < n ? t.series[static_cast<std::size_t>(interval)] : 0.0;
}

StepResult Environment::step(const EnvState& state, std::span<const Allocation> allocs) const {
    const int I = num_slices();
    const int J = num_ras();
    if (static_cast<int>(allocs.size()) != J) {
        throw ConfigError("step: expected " + std::to_string(J) + " allocations, got " +
                          std::to_string(allocs.size()));
    }
    if (state.queues.rows() != I || state.queues.cols() != J || static_cast<int>(state.rngs.size()) != J) {
        throw ConfigError("step: environment state does not match network dimensions");
    }

    StepResult out{state, PerfMatrix::zeros(I, J), Matrix::Zero(I, J), Matrix::Zero(I, J)};
    for (int j = 0; j < J; ++j) {
        const auto& alloc = allocs[static_cast<std::size_t>(j)];
        if (alloc.num_slices() != I || alloc.num_resources() != num_resources_) {
            throw ConfigError("step: allocation for RA " + std::to_string(j) + " has the wrong shape");
        }
        const Matrix fractions = effective_fractions(alloc, ras_[static_cast<std::size_t>(j)].capacity);
        auto& rng = out.next.rngs[static_cast<std::size_t>(j)];
        for (int i = 0; i < I; ++i) {
            const double arrivals = draw_arrivals(traffic_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)],
                                                  state.interval, rng);
            const double backlog = state.queues(i, j) + arrivals;
            const double capacity = service_.service(fractions.row(i).transpose(), static_cast<std::size_t>(i),
                                                     slices_[static_cast<std::size_t>(i)],
                                                     ras_[static_cast<std::size_t>(j)]);
            const double served = std::clamp(capacity, 0.0, backlog);
            const double next = std::max(0.0, backlog - served);
            out.arrivals(i, j) = arrivals;
            out.departures(i, j) = served;
            out.next.queues(i, j) = next;
            out.perf.values(i, j) = slice_performance(next, slices_[static_cast<std::size_t>(i)].alpha);
        }
    }
    out.next.interval = state.interval + 1;
    return out;
}

Environment Environment::single_ra(int ra) const {
    if (ra < 0 || ra >= num_ras()) throw ConfigError("single_ra: RA index out of range");
    std::vector<std::vector<TrafficSource>> traffic;
    for (const auto& row : traffic_) traffic.push_back({row[static_cast<std::size_t>(ra)]});
    return Environment(slices_, {ras_[static_cast<std::size_t>(ra)]}, std::move(traffic), service_);
}

}  // namespace edgeslice
